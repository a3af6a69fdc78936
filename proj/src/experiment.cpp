#include "evodiff/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <mutex>
#include <set>

#include "evodiff/error.hpp"
#include "evodiff/gmm_denoiser.hpp"
#include "evodiff/mlp_denoiser.hpp"
#include "evodiff/parallel.hpp"
#include "evodiff/sampler.hpp"
#include "evodiff/serialization.hpp"
#include "evodiff/synth.hpp"

namespace evodiff {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (n_runs < 0) throw ConfigError("n_runs must be >= 0");
  if (arms.empty()) throw ConfigError("experiment needs at least one arm");
  std::set<std::string> names;
  for (const auto& arm : arms) {
    if (arm.name.empty()) throw ConfigError("arm names must be non-empty");
    if (!names.insert(arm.name).second) throw ConfigError("duplicate arm name '" + arm.name + "'");
    if (arm.guidance) arm.guidance->validate(steps);
  }
  for (const auto& [a, b] : comparisons) {
    if (!names.count(a) || !names.count(b)) {
      throw ConfigError("comparison references unknown arm '" + (names.count(a) ? b : a) + "'");
    }
  }
  if (curve_stride < 1) throw ConfigError("curve stride must be >= 1");
  if (bins < 1) throw ConfigError("bins must be >= 1");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

namespace {

const char* decode_name(CurveDecode d) { return d == CurveDecode::kState ? "state" : "predicted"; }

}  // namespace

ExperimentConfig parse_experiment_config(const json& doc) {
  require_known_keys(doc,
                     {"task", "task_params", "n_runs", "base_seed", "schedule", "denoiser", "arms",
                      "curves", "comparisons", "bins", "record_wall_time", "threads"},
                     "experiment config");
  ExperimentConfig cfg;
  try {
    cfg.task = doc.value("task", cfg.task);
    if (doc.contains("task_params")) cfg.task_params = doc.at("task_params");
    cfg.n_runs = doc.value("n_runs", cfg.n_runs);
    cfg.base_seed = doc.value("base_seed", cfg.base_seed);
    if (doc.contains("schedule")) {
      const json& s = doc.at("schedule");
      require_known_keys(s, {"T", "beta_min", "beta_max", "kind", "variance"}, "schedule");
      if (s.value("kind", std::string("linear")) != "linear") {
        throw ConfigError("schedule kind must be 'linear'");
      }
      cfg.steps = s.value("T", cfg.steps);
      const BetaRange range = default_beta_range(cfg.steps);
      cfg.beta_min = s.value("beta_min", range.min);
      cfg.beta_max = s.value("beta_max", range.max);
      const std::string var = s.value("variance", std::string("posterior"));
      if (var == "posterior") {
        cfg.variance = ReverseVariance::kPosterior;
      } else if (var == "beta") {
        cfg.variance = ReverseVariance::kBeta;
      } else {
        throw ConfigError("schedule variance must be 'posterior' or 'beta'");
      }
    }
    if (doc.contains("denoiser")) cfg.denoiser = doc.at("denoiser");
    for (const json& arm : doc.at("arms")) {
      require_known_keys(arm, {"name", "guidance"}, "arm");
      ArmConfig a;
      a.name = arm.at("name").get<std::string>();
      if (arm.contains("guidance") && !arm.at("guidance").is_null()) {
        a.guidance = guidance_from_json(arm.at("guidance"));
      }
      cfg.arms.push_back(std::move(a));
    }
    if (doc.contains("curves")) {
      const json& c = doc.at("curves");
      require_known_keys(c, {"record", "stride", "decode"}, "curves");
      cfg.record_curves = c.value("record", false);
      cfg.curve_stride = c.value("stride", 1);
      const std::string decode = c.value("decode", std::string("predicted"));
      if (decode == "predicted") {
        cfg.curve_decode = CurveDecode::kPredicted;
      } else if (decode == "state") {
        cfg.curve_decode = CurveDecode::kState;
      } else {
        throw ConfigError("curve decode must be 'predicted' or 'state'");
      }
    }
    if (doc.contains("comparisons")) {
      for (const json& pair : doc.at("comparisons")) {
        const auto names = pair.get<std::vector<std::string>>();
        if (names.size() != 2) throw ConfigError("comparisons are [arm_a, arm_b] pairs");
        cfg.comparisons.emplace_back(names[0], names[1]);
      }
    }
    cfg.bins = doc.value("bins", cfg.bins);
    cfg.record_wall_time = doc.value("record_wall_time", false);
    cfg.threads = doc.value("threads", 1);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ExperimentConfig& cfg) {
  json arms = json::array();
  for (const auto& arm : cfg.arms) {
    arms.push_back({{"name", arm.name},
                    {"guidance", arm.guidance ? guidance_to_json(*arm.guidance) : json(nullptr)}});
  }
  json comparisons = json::array();
  for (const auto& [a, b] : cfg.comparisons) comparisons.push_back({a, b});
  return {{"task", cfg.task},
          {"task_params", cfg.task_params},
          {"n_runs", cfg.n_runs},
          {"base_seed", cfg.base_seed},
          {"schedule", schedule_spec_json(cfg.steps, cfg.beta_min, cfg.beta_max, cfg.variance)},
          {"denoiser", cfg.denoiser},
          {"arms", arms},
          {"curves",
           {{"record", cfg.record_curves},
            {"stride", cfg.curve_stride},
            {"decode", decode_name(cfg.curve_decode)}}},
          {"comparisons", comparisons},
          {"bins", cfg.bins},
          {"record_wall_time", cfg.record_wall_time}};
}

bool PairedRunResult::failed() const {
  return std::any_of(arms.begin(), arms.end(), [](const ArmResult& a) { return a.failed; });
}

const ArmResult* PairedRunResult::arm(const std::string& name) const {
  for (const auto& a : arms) {
    if (a.arm == name) return &a;
  }
  return nullptr;
}

namespace {

GaussianMixturePrior default_toy_prior() {
  GaussianMixturePrior prior;
  prior.weights = {0.5, 0.5};
  prior.means = {{-2.0, 0.0}, {2.0, 0.0}};
  prior.variances = {{0.25, 0.25}, {0.25, 0.25}};
  return prior;
}

std::shared_ptr<const Denoiser> make_denoiser(const ExperimentConfig& cfg, const Task& task,
                                              const NoiseSchedule& schedule) {
  const json& spec = cfg.denoiser;
  const std::string kind =
      spec.is_object() && spec.contains("kind")
          ? spec.at("kind").get<std::string>()
          : (cfg.task == "flow" || cfg.task == "metasurface" ? "synth_prior" : "gmm");
  if (kind == "gmm") {
    require_known_keys(spec.is_object() ? spec : json::object(), {"kind", "path", "prior"},
                       "gmm denoiser");
    GaussianMixturePrior prior;
    if (spec.contains("path")) {
      prior = prior_from_json(load_json_file(spec.at("path").get<std::string>()));
    } else if (spec.contains("prior")) {
      prior = prior_from_json(spec.at("prior"));
    } else {
      prior = default_toy_prior();
    }
    if (prior.dim() != task.fitness.dim) {
      throw ConfigError("prior dimension does not match task '" + task.name + "'");
    }
    return std::make_shared<AnalyticGmmDenoiser>(std::move(prior), schedule);
  }
  if (kind == "mlp") {
    require_known_keys(spec, {"kind", "path", "model"}, "mlp denoiser");
    MlpDenoiser model = spec.contains("path")
                            ? model_from_json(load_json_file(spec.at("path").get<std::string>()))
                            : model_from_json(spec.at("model"));
    if (!model.schedule_hash.empty() && model.schedule_hash != schedule.hash()) {
      throw ConfigError("mlp model was trained with a different noise schedule");
    }
    if (model.dim() != task.fitness.dim) {
      throw ConfigError("model dimension does not match task '" + task.name + "'");
    }
    return std::make_shared<LearnedDenoiser>(std::move(model), schedule);
  }
  if (kind == "synth_prior") {
    require_known_keys(spec.is_object() ? spec : json::object(),
                       {"kind", "n", "variance", "seed"}, "synth_prior denoiser");
    const int n = spec.value("n", 64);
    const double variance = spec.value("variance", 0.05);
    const std::uint64_t seed = spec.value("seed", std::uint64_t{20250101});
    const RngStream rng(seed, StreamLabel::kDataset);
    std::vector<std::vector<double>> data;
    if (task.shape.kind == DesignKind::kGrid) {
      data = synth_topology_dataset(n, task.shape.dims[0], task.shape.dims[1], rng);
    } else if (task.shape.kind == DesignKind::kStack) {
      data = synth_stack_dataset(n, task.shape.dims[0], rng);
    } else {
      throw ConfigError("synth_prior is only defined for grid and stack tasks");
    }
    return std::make_shared<AnalyticGmmDenoiser>(prior_from_dataset(data, variance), schedule);
  }
  throw ConfigError("unknown denoiser kind '" + kind + "'");
}

}  // namespace

ExperimentContext make_context(const ExperimentConfig& cfg) {
  cfg.validate();
  const NoiseSchedule schedule =
      build_schedule(cfg.steps, cfg.beta_min, cfg.beta_max, ScheduleKind::kLinear, cfg.variance);
  ExperimentContext ctx;
  ctx.task = make_task(cfg.task, cfg.task_params);
  ctx.denoiser = make_denoiser(cfg, ctx.task, schedule);
  return ctx;
}

std::uint64_t run_seed(std::uint64_t base_seed, int run_index) {
  return derive_seed(base_seed, static_cast<std::uint64_t>(run_index));
}

std::vector<std::pair<int, double>> objective_curve(const Trajectory& trajectory, const Task& task,
                                                    int stride, int t_high, int t_low,
                                                    CurveDecode decode) {
  if (stride < 1) throw ConfigError("curve stride must be >= 1");
  std::vector<std::pair<int, double>> curve;
  auto value_at = [&](const TrajectoryState& s) {
    const auto& x = decode == CurveDecode::kPredicted && !s.x0_hat.empty() ? s.x0_hat : s.x;
    return task.objective(x);
  };
  for (const auto& s : trajectory.states) {
    if (s.t > t_high || s.t < t_low) continue;
    if ((t_high - s.t) % stride == 0 || s.t == t_low) curve.emplace_back(s.t, value_at(s));
  }
  return curve;
}

ExperimentOutput run_paired_experiment(const ExperimentConfig& cfg, const ExperimentContext& ctx,
                                       const std::function<void(const PairedRunResult&)>& on_run) {
  cfg.validate();
  const int steps = ctx.denoiser->schedule().steps();
  if (steps != cfg.steps) throw ConfigError("denoiser schedule does not match the config");

  const int curve_high = steps / 2;
  ExperimentOutput output;
  output.runs.resize(static_cast<std::size_t>(cfg.n_runs));
  std::vector<char> done(output.runs.size(), 0);
  std::size_t next_emit = 0;
  std::mutex mu;

  auto run_one = [&](std::size_t k) {
    PairedRunResult run;
    run.run_index = static_cast<int>(k);
    run.run_seed = run_seed(cfg.base_seed, run.run_index);
    const RngStream trajectory(run.run_seed, StreamLabel::kTrajectory);
    for (const auto& arm : cfg.arms) {
      ArmResult res;
      res.arm = arm.name;
      const RngStream population(derive_seed(run.run_seed, fnv1a64(arm.name)),
                                 StreamLabel::kPopulation);
      const auto start = std::chrono::steady_clock::now();
      try {
        SamplingOptions opts;
        opts.guidance = arm.guidance;
        if (opts.guidance && opts.guidance->parallel_eval) opts.guidance->threads = cfg.threads;
        opts.fitness = &ctx.task.fitness;
        opts.record_states = cfg.record_curves;
        const Trajectory traj = run_denoising(*ctx.denoiser, trajectory, population, opts);
        res.x_T = traj.x_T;
        res.x0 = traj.x0;
        res.n_fitness_evals = traj.fitness_evaluations;
        res.objective = ctx.task.objective(traj.x0);
        if (!std::isfinite(res.objective)) throw NumericError("non-finite final objective");
        if (cfg.record_curves) {
          res.curve = objective_curve(traj, ctx.task, cfg.curve_stride, curve_high, 0,
                                      cfg.curve_decode);
        }
      } catch (const Error& e) {
        res.failed = true;
        res.error_code = static_cast<int>(e.code());
        res.error = e.what();
      } catch (const std::exception& e) {
        res.failed = true;
        res.error_code = static_cast<int>(ErrorCode::kInternal);
        res.error = e.what();
      }
      if (cfg.record_wall_time) {
        res.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                start)
                          .count();
      }
      run.arms.push_back(std::move(res));
    }

    std::lock_guard lock(mu);
    output.runs[k] = std::move(run);
    done[k] = 1;
    while (next_emit < done.size() && done[next_emit]) {
      if (on_run) on_run(output.runs[next_emit]);
      ++next_emit;
    }
  };
  parallel_for(output.runs.size(), cfg.threads, run_one);

  for (const auto& run : output.runs) {
    if (run.failed()) ++output.failed_runs;
  }
  return output;
}

double median_of(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

// Mean over a sorted copy so the result does not depend on input order.
double ordered_mean(std::vector<double> values) {
  if (values.empty()) return std::nan("");
  std::sort(values.begin(), values.end());
  double acc = 0.0;
  for (double v : values) acc += v;
  return acc / static_cast<double>(values.size());
}

}  // namespace

HistogramSummary summarize(const std::vector<PairedRunResult>& runs, const std::string& arm_a,
                           const std::string& arm_b, int bins) {
  if (bins < 1) throw ConfigError("bins must be >= 1");
  HistogramSummary s;
  s.arm_a = arm_a;
  s.arm_b = arm_b;
  std::vector<double> a_vals, b_vals, diffs;
  bool seen_a = false, seen_b = false;
  for (const auto& run : runs) {
    const ArmResult* a = run.arm(arm_a);
    const ArmResult* b = run.arm(arm_b);
    seen_a = seen_a || a != nullptr;
    seen_b = seen_b || b != nullptr;
    if (a == nullptr || b == nullptr || a->failed || b->failed) {
      ++s.failed_runs;
      continue;
    }
    a_vals.push_back(a->objective);
    b_vals.push_back(b->objective);
    diffs.push_back(a->objective - b->objective);
  }
  if (!runs.empty() && (!seen_a || !seen_b)) {
    throw ConfigError("summary arms '" + arm_a + "' / '" + arm_b + "' not present in results");
  }
  s.samples = static_cast<long>(diffs.size());
  s.counts.assign(static_cast<std::size_t>(bins), 0);
  if (diffs.empty()) {
    s.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
    for (int i = 0; i <= bins; ++i) s.bin_edges[static_cast<std::size_t>(i)] = i;
    s.median = s.mean = s.median_a = s.median_b = s.mean_a = s.mean_b = std::nan("");
    return s;
  }
  s.median = median_of(diffs);
  s.mean = ordered_mean(diffs);
  s.median_a = median_of(a_vals);
  s.median_b = median_of(b_vals);
  s.mean_a = ordered_mean(a_vals);
  s.mean_b = ordered_mean(b_vals);
  const auto improved = std::count_if(diffs.begin(), diffs.end(), [](double d) { return d < 0.0; });
  s.fraction_improved = static_cast<double>(improved) / static_cast<double>(diffs.size());

  double lo = *std::min_element(diffs.begin(), diffs.end());
  double hi = *std::max_element(diffs.begin(), diffs.end());
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  s.bin_edges.resize(static_cast<std::size_t>(bins) + 1);
  for (int i = 0; i <= bins; ++i) {
    s.bin_edges[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / bins;
  }
  for (double d : diffs) {
    auto idx = static_cast<long>(std::floor((d - lo) / (hi - lo) * bins));
    idx = std::clamp(idx, 0L, static_cast<long>(bins) - 1);
    ++s.counts[static_cast<std::size_t>(idx)];
  }
  return s;
}

}  // namespace evodiff
