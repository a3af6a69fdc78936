#include "evodiff/evodiff.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "evodiff/error.hpp"
#include "evodiff/experiment.hpp"
#include "evodiff/gmm_denoiser.hpp"
#include "evodiff/mlp_denoiser.hpp"
#include "evodiff/report.hpp"
#include "evodiff/sampler.hpp"
#include "evodiff/serialization.hpp"
#include "evodiff/synth.hpp"

using nlohmann::json;

struct evd_schedule {
  evodiff::NoiseSchedule schedule;
};

struct evd_denoiser {
  std::shared_ptr<const evodiff::Denoiser> impl;
};

struct evd_fitness {
  evodiff::Task task;
};

namespace {

thread_local std::string g_last_error;
thread_local int g_last_step = -1;
thread_local int g_last_sample = -1;

void clear_error() {
  g_last_error.clear();
  g_last_step = -1;
  g_last_sample = -1;
}

evd_status fail(evd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Caller handed us something unusable (buffer too small and the like).
struct ArgumentError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Runs `body`, translating exceptions into status codes.
template <typename Body>
evd_status guarded(Body&& body) {
  clear_error();
  try {
    body();
    return EVD_OK;
  } catch (const evodiff::FitnessError& e) {
    g_last_step = e.step();
    g_last_sample = e.sample();
    return fail(EVD_ERR_FITNESS, e.what());
  } catch (const evodiff::Error& e) {
    return fail(static_cast<evd_status>(e.code()), e.what());
  } catch (const ArgumentError& e) {
    return fail(EVD_ERR_INVALID_ARGUMENT, e.what());
  } catch (const json::exception& e) {
    return fail(EVD_ERR_CONFIG, std::string("invalid JSON: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(EVD_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(EVD_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(EVD_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_or_empty(const char* text) {
  if (text == nullptr || *text == '\0') return json::object();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw evodiff::ConfigError(std::string("invalid JSON: ") + e.what());
  }
}


#define EVD_REQUIRE(cond, msg)                                              \
  do {                                                                      \
    if (!(cond)) return fail(EVD_ERR_INVALID_ARGUMENT, std::string(msg)); \
  } while (0)

std::shared_ptr<const evodiff::Denoiser> denoiser_from_doc(const json& doc,
                                                           const evodiff::NoiseSchedule& schedule) {
  if (doc.contains("layer_sizes")) {
    evodiff::MlpDenoiser model = evodiff::model_from_json(doc);
    if (!model.schedule_hash.empty() && model.schedule_hash != schedule.hash()) {
      throw evodiff::ConfigError("model was trained with a different noise schedule (hash " +
                                 model.schedule_hash + ", expected " + schedule.hash() + ")");
    }
    return std::make_shared<evodiff::LearnedDenoiser>(std::move(model), schedule);
  }
  return std::make_shared<evodiff::AnalyticGmmDenoiser>(evodiff::prior_from_json(doc), schedule);
}

}  // namespace

extern "C" {

const char* evd_version(void) { return "0.1.0"; }

const char* evd_last_error(void) { return g_last_error.c_str(); }
int evd_last_error_step(void) { return g_last_step; }
int evd_last_error_sample(void) { return g_last_sample; }

void evd_string_free(char* s) { std::free(s); }

uint64_t evd_derive_seed(uint64_t parent, uint64_t salt) {
  return evodiff::derive_seed(parent, salt);
}

evd_status evd_config_hash(const char* text, char** out) {
  EVD_REQUIRE(text != nullptr && out != nullptr, "evd_config_hash: null argument");
  return guarded([&] { *out = dup_string(evodiff::config_hash(parse_or_empty(text))); });
}

evd_status evd_schedule_create(const char* spec_json, evd_schedule** out) {
  EVD_REQUIRE(out != nullptr, "evd_schedule_create: null output");
  *out = nullptr;
  return guarded([&] {
    *out = new evd_schedule{evodiff::schedule_from_json(parse_or_empty(spec_json))};
  });
}

evd_status evd_schedule_steps(const evd_schedule* schedule, int* out) {
  EVD_REQUIRE(schedule != nullptr && out != nullptr, "evd_schedule_steps: null argument");
  *out = schedule->schedule.steps();
  return EVD_OK;
}

evd_status evd_schedule_hash(const evd_schedule* schedule, char** out) {
  EVD_REQUIRE(schedule != nullptr && out != nullptr, "evd_schedule_hash: null argument");
  return guarded([&] { *out = dup_string(schedule->schedule.hash()); });
}

evd_status evd_schedule_free(evd_schedule* schedule) {
  delete schedule;
  return EVD_OK;
}

evd_status evd_denoiser_load(const char* path, const evd_schedule* schedule, evd_denoiser** out) {
  EVD_REQUIRE(path != nullptr && schedule != nullptr && out != nullptr,
              "evd_denoiser_load: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new evd_denoiser{denoiser_from_doc(evodiff::load_json_file(path), schedule->schedule)};
  });
}

evd_status evd_denoiser_from_json(const char* text, const evd_schedule* schedule,
                                  evd_denoiser** out) {
  EVD_REQUIRE(text != nullptr && schedule != nullptr && out != nullptr,
              "evd_denoiser_from_json: null argument");
  *out = nullptr;
  return guarded([&] {
    *out = new evd_denoiser{denoiser_from_doc(parse_or_empty(text), schedule->schedule)};
  });
}

evd_status evd_denoiser_dim(const evd_denoiser* denoiser, size_t* out) {
  EVD_REQUIRE(denoiser != nullptr && out != nullptr, "evd_denoiser_dim: null argument");
  *out = denoiser->impl->dim();
  return EVD_OK;
}

evd_status evd_denoiser_free(evd_denoiser* denoiser) {
  delete denoiser;
  return EVD_OK;
}

evd_status evd_fitness_create(const char* name, const char* params_json, evd_fitness** out) {
  EVD_REQUIRE(name != nullptr && out != nullptr, "evd_fitness_create: null argument");
  *out = nullptr;
  return guarded([&] { *out = new evd_fitness{evodiff::make_task(name, parse_or_empty(params_json))}; });
}

evd_status evd_fitness_dim(const evd_fitness* fitness, size_t* out) {
  EVD_REQUIRE(fitness != nullptr && out != nullptr, "evd_fitness_dim: null argument");
  *out = fitness->task.fitness.dim;
  return EVD_OK;
}

evd_status evd_fitness_evaluate(const evd_fitness* fitness, const double* x, size_t n,
                                double* out) {
  EVD_REQUIRE(fitness != nullptr && out != nullptr && (x != nullptr || n == 0),
              "evd_fitness_evaluate: null argument");
  return guarded([&] { *out = fitness->task.fitness(std::span<const double>(x, n)); });
}

evd_status evd_fitness_objective(const evd_fitness* fitness, const double* x, size_t n,
                                 double* out) {
  EVD_REQUIRE(fitness != nullptr && out != nullptr && (x != nullptr || n == 0),
              "evd_fitness_objective: null argument");
  return guarded([&] {
    if (fitness->task.fitness.dim != 0 && n != fitness->task.fitness.dim) {
      throw evodiff::ConfigError("design length " + std::to_string(n) + " does not match task '" +
                                 fitness->task.name + "' (" +
                                 std::to_string(fitness->task.fitness.dim) + ")");
    }
    *out = fitness->task.objective(std::span<const double>(x, n));
  });
}

evd_status evd_fitness_design_json(const evd_fitness* fitness, const double* x, size_t n,
                                   char** out) {
  EVD_REQUIRE(fitness != nullptr && out != nullptr && (x != nullptr || n == 0),
              "evd_fitness_design_json: null argument");
  return guarded([&] {
    *out = dup_string(evodiff::design_to_json(fitness->task.shape, std::vector<double>(x, x + n)).dump());
  });
}

evd_status evd_design_parse(const char* text, double* values, size_t* n_inout) {
  EVD_REQUIRE(text != nullptr && n_inout != nullptr, "evd_design_parse: null argument");
  return guarded([&] {
    evodiff::DesignShape shape;
    const std::vector<double> v = evodiff::design_from_json(parse_or_empty(text), shape);
    const std::size_t capacity = *n_inout;
    *n_inout = v.size();
    if (values == nullptr || capacity < v.size()) {
      if (values != nullptr) throw ArgumentError("design buffer too small");
      return;
    }
    std::copy(v.begin(), v.end(), values);
  });
}

evd_status evd_fitness_free(evd_fitness* fitness) {
  delete fitness;
  return EVD_OK;
}

evd_status evd_sample(const evd_denoiser* denoiser, const evd_sample_request* request,
                      double* x0_out, size_t n, char** trajectory_json) {
  EVD_REQUIRE(denoiser != nullptr && request != nullptr && x0_out != nullptr,
              "evd_sample: null argument");
  EVD_REQUIRE(n == denoiser->impl->dim(), "evd_sample: output length does not match denoiser");
  return guarded([&] {
    evodiff::SamplingOptions opts;
    if (request->guidance_json != nullptr) {
      opts.guidance = evodiff::guidance_from_json(parse_or_empty(request->guidance_json));
      opts.guidance->threads = request->threads > 0 ? request->threads : 1;
      if (opts.guidance->threads > 1) opts.guidance->parallel_eval = true;
      if (request->fitness == nullptr) throw evodiff::ConfigError("guided sampling needs a fitness");
      if (request->fitness->task.fitness.dim != denoiser->impl->dim()) {
        throw evodiff::ConfigError("fitness dimension does not match the denoiser");
      }
      opts.fitness = &request->fitness->task.fitness;
    }
    std::ofstream diag;
    if (request->diagnostics_path != nullptr) {
      diag.open(request->diagnostics_path);
      if (!diag) throw evodiff::IoError(std::string("cannot open '") + request->diagnostics_path + "'");
      opts.on_guidance = [&diag](const evodiff::GuidanceDiagnostic& d) {
        diag << evodiff::diagnostic_to_json(d.t, d.fitness, d.weights, d.update_norm).dump() << '\n';
      };
    }
    opts.record_states = request->include_states != 0;
    const evodiff::RngStream trajectory(request->seed, evodiff::StreamLabel::kTrajectory);
    const evodiff::RngStream population(request->seed, evodiff::StreamLabel::kPopulation);
    evodiff::Trajectory traj = evodiff::run_denoising(*denoiser->impl, trajectory, population, opts);
    std::copy(traj.x0.begin(), traj.x0.end(), x0_out);
    if (trajectory_json != nullptr) {
      if (opts.record_states && request->fitness != nullptr) {
        const int steps = denoiser->impl->schedule().steps();
        traj.objective_curve = evodiff::objective_curve(traj, request->fitness->task, 1, steps, 0);
      }
      *trajectory_json = dup_string(
          evodiff::trajectory_to_json(traj, request->seed,
                                      request->config_hash ? request->config_hash : "",
                                      opts.record_states)
              .dump());
    }
  });
}

evd_status evd_train(const char* dataset_json, const evd_schedule* schedule,
                     const char* hyper_json, char** model_json, char** losses_json) {
  EVD_REQUIRE(dataset_json != nullptr && schedule != nullptr && model_json != nullptr,
              "evd_train: null argument");
  return guarded([&] {
    const json data = parse_or_empty(dataset_json);
    if (!data.is_array()) throw evodiff::ConfigError("dataset must be a JSON array of vectors");
    const auto dataset = data.get<std::vector<std::vector<double>>>();
    const json h = parse_or_empty(hyper_json);
    evodiff::require_known_keys(h, {"epochs", "batch", "learning_rate", "momentum", "hidden", "seed"},
                                "training hyperparameters");
    evodiff::TrainHyper hyper;
    hyper.epochs = h.value("epochs", hyper.epochs);
    hyper.batch = h.value("batch", hyper.batch);
    hyper.learning_rate = h.value("learning_rate", hyper.learning_rate);
    hyper.momentum = h.value("momentum", hyper.momentum);
    hyper.hidden = h.value("hidden", hyper.hidden);
    hyper.seed = h.value("seed", hyper.seed);
    const evodiff::TrainResult result = evodiff::mlp_train(dataset, schedule->schedule, hyper);
    *model_json = dup_string(evodiff::model_to_json(result.model).dump());
    if (losses_json != nullptr) {
      json losses = {{"epoch_losses", result.epoch_losses}, {"final_loss", result.final_loss}};
      *losses_json = dup_string(losses.dump());
    }
  });
}

evd_status evd_synth_dataset(const char* kind, int n, int width, int height, uint64_t seed,
                             char** out) {
  EVD_REQUIRE(kind != nullptr && out != nullptr, "evd_synth_dataset: null argument");
  return guarded([&] {
    const evodiff::RngStream rng(seed, evodiff::StreamLabel::kDataset);
    const std::string k = kind;
    std::vector<std::vector<double>> data;
    if (k == "topology") {
      data = evodiff::synth_topology_dataset(n, width, height, rng);
    } else if (k == "stack") {
      data = evodiff::synth_stack_dataset(n, width, rng);
    } else {
      throw evodiff::ConfigError("synthetic dataset kind must be 'topology' or 'stack'");
    }
    *out = dup_string(json(data).dump());
  });
}

evd_status evd_experiment_run(const char* config_json, const char* out_dir, int threads,
                              char** report_json) {
  EVD_REQUIRE(config_json != nullptr && out_dir != nullptr, "evd_experiment_run: null argument");
  return guarded([&] {
    namespace fs = std::filesystem;
    evodiff::ExperimentConfig cfg = evodiff::parse_experiment_config(parse_or_empty(config_json));
    if (threads > 0) cfg.threads = threads;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw evodiff::IoError(std::string("cannot create '") + out_dir + "': " + ec.message());
    const fs::path dir(out_dir);
    const std::string hash = evodiff::config_hash(evodiff::to_json(cfg));
    const evodiff::ExperimentContext ctx = evodiff::make_context(cfg);

    evodiff::ResultsWriter writer((dir / "results.csv").string());
    const evodiff::ExperimentOutput output = evodiff::run_paired_experiment(
        cfg, ctx, [&writer](const evodiff::PairedRunResult& run) { writer.append(run); });
    evodiff::emit_json(output.runs, (dir / "results.json").string());

    json outputs = {writer.path(), (dir / "results.json").string()};
    json summaries = json::array();
    for (const auto& [a, b] : cfg.comparisons) {
      const evodiff::HistogramSummary s = evodiff::summarize(output.runs, a, b, cfg.bins);
      const std::string stem = "summary_" + a + "_vs_" + b;
      evodiff::emit_json(s, (dir / (stem + ".json")).string());
      evodiff::emit_svg_histogram(s, (dir / (stem + ".svg")).string());
      outputs.push_back((dir / (stem + ".json")).string());
      outputs.push_back((dir / (stem + ".svg")).string());
      summaries.push_back(evodiff::summary_to_json(s));
    }
    const json report = {{"config_hash", hash},
                         {"n_runs", cfg.n_runs},
                         {"failed_runs", output.failed_runs},
                         {"summaries", summaries},
                         {"outputs", outputs}};
    evodiff::save_json_file((dir / "summary.json").string(), report);
    if (report_json != nullptr) *report_json = dup_string(report.dump());

    if (cfg.n_runs > 0 && output.failed_runs == cfg.n_runs) {
      int code = static_cast<int>(evodiff::ErrorCode::kInternal);
      std::string first;
      for (const auto& arm : output.runs.front().arms) {
        if (arm.failed) {
          code = arm.error_code;
          first = arm.error;
          break;
        }
      }
      throw evodiff::Error(static_cast<evodiff::ErrorCode>(code),
                           "all " + std::to_string(cfg.n_runs) + " runs failed; first error: " + first);
    }
  });
}

evd_status evd_plot_summary(const char* summary_json, const char* svg_path, int width, int height) {
  EVD_REQUIRE(summary_json != nullptr && svg_path != nullptr, "evd_plot_summary: null argument");
  return guarded([&] {
    const evodiff::HistogramSummary s = evodiff::summary_from_json(parse_or_empty(summary_json));
    evodiff::emit_svg_histogram(s, svg_path, width, height);
  });
}

}  // extern "C"
