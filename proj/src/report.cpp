#include "evodiff/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "evodiff/error.hpp"

namespace evodiff {

using nlohmann::json;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::string csv_rows(const PairedRunResult& run) {
  std::string out;
  for (const auto& arm : run.arms) {
    out += std::to_string(run.run_seed);
    out += ',';
    out += arm.arm;
    out += ',';
    out += arm.failed ? std::string("nan") : format_double(arm.objective);
    out += ',';
    out += std::to_string(arm.n_fitness_evals);
    out += ',';
    out += format_double(arm.wall_ms);
    out += '\n';
  }
  return out;
}

double number_or_nan(const json& v) { return v.is_null() ? std::nan("") : v.get<double>(); }

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

ResultsWriter::ResultsWriter(const std::string& path) : path_(path), out_(path) {
  if (!out_) throw IoError("cannot open '" + path + "' for writing");
  out_ << kResultsCsvHeader << '\n';
  out_.flush();
}

void ResultsWriter::append(const PairedRunResult& run) {
  out_ << csv_rows(run);
  out_.flush();
  if (!out_) throw IoError("failed writing '" + path_ + "'");
}

std::string results_csv(const std::vector<PairedRunResult>& runs) {
  std::string out = std::string(kResultsCsvHeader) + "\n";
  for (const auto& run : runs) out += csv_rows(run);
  return out;
}

void emit_csv(const std::vector<PairedRunResult>& runs, const std::string& path) {
  write_text_file(path, results_csv(runs));
}

json summary_to_json(const HistogramSummary& s) {
  return {{"arms", {s.arm_a, s.arm_b}},
          {"medians", {{"arm_a", s.median_a}, {"arm_b", s.median_b}, {"difference", s.median}}},
          {"means", {{"arm_a", s.mean_a}, {"arm_b", s.mean_b}, {"difference", s.mean}}},
          {"fraction_improved", s.fraction_improved},
          {"bins", {{"edges", s.bin_edges}, {"counts", s.counts}}},
          {"samples", s.samples},
          {"failed_runs", s.failed_runs}};
}

HistogramSummary summary_from_json(const json& doc) {
  HistogramSummary s;
  try {
    const auto arms = doc.at("arms").get<std::vector<std::string>>();
    if (arms.size() != 2) throw ConfigError("summary arms must be a pair");
    s.arm_a = arms[0];
    s.arm_b = arms[1];
    s.median_a = number_or_nan(doc.at("medians").at("arm_a"));
    s.median_b = number_or_nan(doc.at("medians").at("arm_b"));
    s.median = number_or_nan(doc.at("medians").at("difference"));
    s.mean_a = number_or_nan(doc.at("means").at("arm_a"));
    s.mean_b = number_or_nan(doc.at("means").at("arm_b"));
    s.mean = number_or_nan(doc.at("means").at("difference"));
    s.fraction_improved = doc.at("fraction_improved").get<double>();
    s.bin_edges = doc.at("bins").at("edges").get<std::vector<double>>();
    s.counts = doc.at("bins").at("counts").get<std::vector<long>>();
    s.samples = doc.value("samples", 0L);
    s.failed_runs = doc.value("failed_runs", 0L);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("summary: ") + e.what());
  }
  if (s.bin_edges.size() != s.counts.size() + 1) {
    throw ConfigError("summary: bin edges must number counts + 1");
  }
  return s;
}

void emit_json(const HistogramSummary& summary, const std::string& path) {
  write_text_file(path, summary_to_json(summary).dump(2) + "\n");
}

json results_to_json(const std::vector<PairedRunResult>& runs) {
  json out = json::array();
  for (const auto& run : runs) {
    json arms = json::array();
    for (const auto& a : run.arms) {
      json curve = json::array();
      for (const auto& [t, v] : a.curve) curve.push_back({t, v});
      arms.push_back({{"arm", a.arm},
                      {"objective", a.objective},
                      {"n_fitness_evals", a.n_fitness_evals},
                      {"wall_ms", a.wall_ms},
                      {"x0", a.x0},
                      {"curve", curve},
                      {"failed", a.failed},
                      {"error", a.error}});
    }
    out.push_back({{"run_index", run.run_index}, {"run_seed", run.run_seed}, {"arms", arms}});
  }
  return out;
}

std::vector<PairedRunResult> results_from_json(const json& doc) {
  std::vector<PairedRunResult> runs;
  try {
    for (const json& r : doc) {
      PairedRunResult run;
      run.run_index = r.at("run_index").get<int>();
      run.run_seed = r.at("run_seed").get<std::uint64_t>();
      for (const json& a : r.at("arms")) {
        ArmResult arm;
        arm.arm = a.at("arm").get<std::string>();
        arm.objective = number_or_nan(a.at("objective"));
        arm.n_fitness_evals = a.at("n_fitness_evals").get<long>();
        arm.wall_ms = a.at("wall_ms").get<double>();
        arm.x0 = a.at("x0").get<std::vector<double>>();
        for (const json& p : a.at("curve")) arm.curve.emplace_back(p.at(0).get<int>(), p.at(1).get<double>());
        arm.failed = a.at("failed").get<bool>();
        arm.error = a.at("error").get<std::string>();
        run.arms.push_back(std::move(arm));
      }
      runs.push_back(std::move(run));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("results: ") + e.what());
  }
  return runs;
}

void emit_json(const std::vector<PairedRunResult>& runs, const std::string& path) {
  write_text_file(path, results_to_json(runs).dump(2) + "\n");
}

std::string svg_histogram(const HistogramSummary& s, int width, int height) {
  if (width < 200 || height < 150) throw ConfigError("svg must be at least 200 x 150");
  const double left = 70, right = 20, top = 40, bottom = 60;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const long max_count = s.counts.empty() ? 0 : *std::max_element(s.counts.begin(), s.counts.end());
  const double y_scale = max_count > 0 ? plot_h / static_cast<double>(max_count) : 0.0;
  const std::size_t bins = s.counts.size();
  const double bar_w = bins > 0 ? plot_w / static_cast<double>(bins) : plot_w;
  const std::string label = escape_xml(s.arm_a) + " − " + escape_xml(s.arm_b);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"15\">Paired objective difference: "
      << label << "</text>\n";
  for (std::size_t i = 0; i < bins; ++i) {
    const double h = static_cast<double>(s.counts[i]) * y_scale;
    svg << "<rect class=\"bar\" data-count=\"" << s.counts[i] << "\" x=\"" << left + bar_w * i
        << "\" y=\"" << top + plot_h - h << "\" width=\"" << std::max(bar_w - 1.0, 0.5)
        << "\" height=\"" << h << "\" fill=\"#4477aa\"/>\n";
  }
  // axes
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  if (!s.bin_edges.empty()) {
    svg << "<text x=\"" << left << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(s.bin_edges.front()).substr(0, 10) << "</text>\n";
    svg << "<text x=\"" << left + plot_w << "\" y=\"" << top + plot_h + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
        << format_double(s.bin_edges.back()).substr(0, 10) << "</text>\n";
  }
  svg << "<text x=\"" << left - 8 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << max_count
      << "</text>\n";
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">objective difference ("
      << label << ")</text>\n";
  svg << "<text x=\"18\" y=\"" << top + plot_h / 2 << "\" transform=\"rotate(-90 18 "
      << top + plot_h / 2
      << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">paired runs</text>\n";
  // legend
  svg << "<rect class=\"legend\" x=\"" << left + plot_w - 150 << "\" y=\"" << top + 4
      << "\" width=\"12\" height=\"12\" fill=\"#4477aa\"/>\n";
  svg << "<text x=\"" << left + plot_w - 132 << "\" y=\"" << top + 14
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

void emit_svg_histogram(const HistogramSummary& summary, const std::string& path, int width,
                        int height) {
  write_text_file(path, svg_histogram(summary, width, height));
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace evodiff
