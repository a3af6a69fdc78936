#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "evodiff/experiment.hpp"

namespace evodiff {

inline constexpr const char* kResultsCsvHeader =
    "run_seed,arm,objective,n_fitness_evals,wall_ms";

/// Appends results rows as runs complete. The header is written on open.
class ResultsWriter {
 public:
  explicit ResultsWriter(const std::string& path);

  void append(const PairedRunResult& run);
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

std::string results_csv(const std::vector<PairedRunResult>& runs);
std::string format_double(double v);

void emit_csv(const std::vector<PairedRunResult>& runs, const std::string& path);

nlohmann::json summary_to_json(const HistogramSummary& summary);
HistogramSummary summary_from_json(const nlohmann::json& doc);
void emit_json(const HistogramSummary& summary, const std::string& path);

nlohmann::json results_to_json(const std::vector<PairedRunResult>& runs);
std::vector<PairedRunResult> results_from_json(const nlohmann::json& doc);
void emit_json(const std::vector<PairedRunResult>& runs, const std::string& path);

std::string svg_histogram(const HistogramSummary& summary, int width = 640, int height = 400);
void emit_svg_histogram(const HistogramSummary& summary, const std::string& path, int width = 640,
                        int height = 400);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

}  // namespace evodiff
