// Command-line front end. Links only the C API.
//
// stdout carries machine-readable output (a JSON manifest, or a CSV table for
// `eval`); logs and errors go to stderr.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "evodiff/evodiff.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 5;

// Carries an exit code up to main.
struct Exit {
  int code;
};

[[noreturn]] void die(int code, const std::string& message) {
  std::cerr << "error: " << message << '\n';
  throw Exit{code};
}

void check(evd_status status, const char* what) {
  if (status == EVD_OK) return;
  std::string message = std::string(what) + ": " + evd_last_error();
  if (status == EVD_ERR_FITNESS && evd_last_error_step() >= 0) {
    message += " (step " + std::to_string(evd_last_error_step()) + ", sample " +
               std::to_string(evd_last_error_sample()) + ")";
  }
  die(status == EVD_ERR_INVALID_ARGUMENT ? kExitConfig : static_cast<int>(status), message);
}

std::string take(char* s) {
  std::string out = s ? s : "";
  evd_string_free(s);
  return out;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die(kExitIo, "cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) die(kExitIo, "cannot write '" + path.string() + "'");
}

// Accepts either inline JSON or a path to a JSON file.
json inline_or_file(const std::string& arg, const char* what) {
  const std::string text = (!arg.empty() && (arg.front() == '{' || arg.front() == '[')) ? arg
                                                                                         : read_file(arg);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    die(kExitConfig, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) die(kExitIo, "cannot create '" + dir.string() + "': " + ec.message());
}

std::string hash_of(const json& doc) {
  char* out = nullptr;
  check(evd_config_hash(doc.dump().c_str(), &out), "config hash");
  return take(out);
}

json versions() { return {{"evodiff", evd_version()}}; }

json manifest(const std::string& command, const json& effective, std::uint64_t seed,
              const json& outputs) {
  return {{"command", command},
          {"config_hash", hash_of(effective)},
          {"seed", seed},
          {"versions", versions()},
          {"outputs", outputs}};
}

// RAII holders for the C handles.
struct Schedule {
  evd_schedule* h = nullptr;
  ~Schedule() { evd_schedule_free(h); }
};
struct Denoiser {
  evd_denoiser* h = nullptr;
  ~Denoiser() { evd_denoiser_free(h); }
};
struct Fitness {
  evd_fitness* h = nullptr;
  ~Fitness() { evd_fitness_free(h); }
};

json schedule_doc(const std::string& arg) {
  return arg.empty() ? json::object() : inline_or_file(arg, "--schedule");
}

// ---- train ----

struct TrainArgs {
  std::string data;
  std::string synth;
  std::string schedule;
  std::string out;
  std::uint64_t seed = 0;
  int epochs = 100;
  double lr = 1e-2;
  int batch = 32;
  double momentum = 0.9;
  std::vector<int> hidden{64, 64};
};

int cmd_train(const TrainArgs& a) {
  Schedule sched;
  const json sched_spec = schedule_doc(a.schedule);
  check(evd_schedule_create(sched_spec.dump().c_str(), &sched.h), "schedule");

  std::string dataset;
  json data_source;
  if (!a.synth.empty()) {
    int w = 0, h = 0, n = 0;
    char comma1 = 0, comma2 = 0;
    std::istringstream in(a.synth);
    if (!(in >> w >> comma1 >> h >> comma2 >> n) || comma1 != ',' || comma2 != ',' || w <= 0 ||
        h <= 0 || n <= 0) {
      die(kExitConfig, "--synth expects W,H,n with positive integers");
    }
    char* out = nullptr;
    check(evd_synth_dataset("topology", n, w, h, a.seed, &out), "synthetic dataset");
    dataset = take(out);
    data_source = {{"synth", {w, h, n}}};
  } else {
    dataset = read_file(a.data);
    data_source = {{"data_hash", hash_of(json::parse(dataset, nullptr, false))}};
  }

  const json hyper = {{"epochs", a.epochs},     {"batch", a.batch},   {"learning_rate", a.lr},
                      {"momentum", a.momentum}, {"hidden", a.hidden}, {"seed", a.seed}};
  std::cerr << "training: epochs=" << a.epochs << " batch=" << a.batch << " lr=" << a.lr << '\n';
  char* model = nullptr;
  char* losses = nullptr;
  check(evd_train(dataset.c_str(), sched.h, hyper.dump().c_str(), &model, &losses), "training");
  const std::string model_text = take(model);
  const json loss_doc = json::parse(take(losses));

  if (fs::path(a.out).has_parent_path()) make_dir(fs::path(a.out).parent_path());
  write_file(a.out, json::parse(model_text).dump(2) + "\n");

  json effective = {{"data", data_source}, {"schedule", sched_spec}, {"hyper", hyper}};
  json m = manifest("train", effective, a.seed, json::array({a.out}));
  m["final_loss"] = loss_doc["final_loss"];
  m["epoch_losses"] = loss_doc["epoch_losses"];
  std::cout << m.dump(2) << '\n';
  return 0;
}

// ---- sample ----

struct SampleArgs {
  std::string denoiser;
  std::string schedule;
  int n = 1;
  std::string guidance = "none";
  std::string fitness;
  std::string fitness_params;
  std::uint64_t seed = 0;
  std::string out;
  int threads = 1;
  bool states = false;
  bool diagnostics = false;
};

int cmd_sample(const SampleArgs& a) {
  if (a.n < 0) die(kExitConfig, "--n must be non-negative");
  if (a.threads < 1) die(kExitConfig, "--threads must be at least 1");
  Schedule sched;
  const json sched_spec = schedule_doc(a.schedule);
  check(evd_schedule_create(sched_spec.dump().c_str(), &sched.h), "schedule");
  Denoiser den;
  check(evd_denoiser_load(a.denoiser.c_str(), sched.h, &den.h), "denoiser");
  std::size_t dim = 0;
  check(evd_denoiser_dim(den.h, &dim), "denoiser");

  json guidance;
  const bool guided = a.guidance != "none";
  if (guided) guidance = inline_or_file(a.guidance, "--guidance");
  if (guided && a.fitness.empty()) die(kExitConfig, "guided sampling needs --fitness");

  Fitness fit;
  json fitness_params = a.fitness_params.empty() ? json::object()
                                                 : inline_or_file(a.fitness_params, "--fitness-params");
  if (!a.fitness.empty()) {
    check(evd_fitness_create(a.fitness.c_str(), fitness_params.dump().c_str(), &fit.h), "fitness");
  }

  const json effective = {{"denoiser_hash", hash_of(json::parse(read_file(a.denoiser), nullptr, false))},
                          {"schedule", sched_spec},
                          {"n", a.n},
                          {"guidance", guided ? guidance : json("none")},
                          {"fitness", a.fitness},
                          {"fitness_params", fitness_params},
                          {"states", a.states}};
  const std::string config_hash = hash_of(effective);
  const std::string guidance_text = guided ? guidance.dump() : std::string();

  const fs::path dir(a.out);
  make_dir(dir);
  json outputs = json::array();
  json samples = json::array();
  std::vector<double> x0(dim);
  for (int i = 0; i < a.n; ++i) {
    const std::uint64_t seed = evd_derive_seed(a.seed, static_cast<std::uint64_t>(i));
    char name[64];
    std::snprintf(name, sizeof(name), "%04d", i);
    const fs::path diag_path = dir / ("diagnostics_" + std::string(name) + ".jsonl");
    const std::string diag = diag_path.string();

    evd_sample_request req{};
    req.seed = seed;
    req.guidance_json = guided ? guidance_text.c_str() : nullptr;
    req.fitness = fit.h;
    req.threads = a.threads;
    req.include_states = a.states ? 1 : 0;
    req.config_hash = config_hash.c_str();
    req.diagnostics_path = (guided && a.diagnostics) ? diag.c_str() : nullptr;
    char* traj = nullptr;
    check(evd_sample(den.h, &req, x0.data(), x0.size(), a.states ? &traj : nullptr), "sampling");

    json entry = {{"index", i}, {"seed", seed}};
    const fs::path design_path = dir / ("design_" + std::string(name) + ".json");
    if (fit.h != nullptr) {
      char* design = nullptr;
      check(evd_fitness_design_json(fit.h, x0.data(), x0.size(), &design), "design");
      write_file(design_path, take(design) + "\n");
      double fitness = 0.0, objective = 0.0;
      check(evd_fitness_evaluate(fit.h, x0.data(), x0.size(), &fitness), "fitness");
      check(evd_fitness_objective(fit.h, x0.data(), x0.size(), &objective), "objective");
      entry["fitness"] = fitness;
      entry["objective"] = objective;
    } else {
      write_file(design_path,
                 json{{"kind", "vector"}, {"shape", {dim}}, {"values", x0}}.dump() + "\n");
    }
    entry["design"] = design_path.string();
    outputs.push_back(design_path.string());
    if (traj != nullptr) {
      const fs::path traj_path = dir / ("trajectory_" + std::string(name) + ".json");
      write_file(traj_path, take(traj) + "\n");
      outputs.push_back(traj_path.string());
    }
    if (req.diagnostics_path != nullptr) outputs.push_back(diag);
    samples.push_back(entry);
    std::cerr << "sample " << i + 1 << "/" << a.n << '\n';
  }

  json m = manifest("sample", effective, a.seed, outputs);
  m["config_hash"] = config_hash;
  m["samples"] = samples;
  const fs::path manifest_path = dir / "manifest.json";
  m["outputs"].push_back(manifest_path.string());
  write_file(manifest_path, m.dump(2) + "\n");
  std::cout << m.dump(2) << '\n';
  return 0;
}

// ---- experiment ----

int cmd_experiment(const std::string& config_path, const std::string& out, int threads) {
  if (threads < 0) die(kExitConfig, "--threads must be non-negative");
  const json cfg = inline_or_file(config_path, "--config");
  char* report = nullptr;
  const evd_status status = evd_experiment_run(cfg.dump().c_str(), out.c_str(), threads, &report);
  json rep = report ? json::parse(take(report)) : json::object();
  if (status != EVD_OK) check(status, "experiment");

  const std::uint64_t seed = cfg.value("base_seed", std::uint64_t{0});
  json m = {{"command", "experiment"},
            {"config_hash", rep["config_hash"]},
            {"seed", seed},
            {"versions", versions()},
            {"outputs", rep["outputs"]},
            {"failed_runs", rep["failed_runs"]},
            {"summaries", rep["summaries"]}};
  const fs::path manifest_path = fs::path(out) / "manifest.json";
  m["outputs"].push_back(manifest_path.string());
  write_file(manifest_path, m.dump(2) + "\n");
  if (rep.value("failed_runs", 0) > 0) {
    std::cerr << "warning: " << rep["failed_runs"] << " run(s) failed\n";
  }
  std::cout << m.dump(2) << '\n';
  return 0;
}

// ---- eval ----

int cmd_eval(const std::string& fitness_name, const std::string& params_arg,
             const std::string& designs) {
  Fitness fit;
  const json params = params_arg.empty() ? json::object() : inline_or_file(params_arg, "--fitness-params");
  check(evd_fitness_create(fitness_name.c_str(), params.dump().c_str(), &fit.h), "fitness");

  std::vector<fs::path> files;
  if (fs::is_directory(designs)) {
    for (const auto& entry : fs::directory_iterator(designs)) {
      const fs::path& p = entry.path();
      if (p.extension() == ".json" && p.filename().string().rfind("design", 0) == 0) files.push_back(p);
    }
    std::sort(files.begin(), files.end());
  } else if (fs::exists(designs)) {
    files.push_back(designs);
  } else {
    die(kExitIo, "no such design file or directory '" + designs + "'");
  }

  std::cout << "design,fitness,objective\n";
  for (const auto& path : files) {
    const std::string text = read_file(path.string());
    std::size_t n = 0;
    check(evd_design_parse(text.c_str(), nullptr, &n), path.string().c_str());
    std::vector<double> values(n);
    check(evd_design_parse(text.c_str(), values.data(), &n), path.string().c_str());
    double fitness = 0.0, objective = 0.0;
    check(evd_fitness_evaluate(fit.h, values.data(), n, &fitness), path.string().c_str());
    check(evd_fitness_objective(fit.h, values.data(), n, &objective), path.string().c_str());
    char line[64];
    std::cout << path.string() << ',';
    std::snprintf(line, sizeof(line), "%.17g,", fitness);
    std::cout << line;
    std::snprintf(line, sizeof(line), "%.17g", objective);
    std::cout << line << '\n';
  }
  return 0;
}

// ---- plot ----

int cmd_plot(const std::string& summary, const std::string& out, int width, int height) {
  const std::string text = read_file(summary);
  check(evd_plot_summary(text.c_str(), out.c_str(), width, height), "plot");
  json m = {{"command", "plot"},
            {"config_hash", hash_of(json::parse(text, nullptr, false))},
            {"seed", 0},
            {"versions", versions()},
            {"outputs", {out}}};
  std::cout << m.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient-free guided diffusion sampling for design optimisation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(evd_version()));

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train an MLP noise predictor");
  auto* data_opt = t->add_option("--data", train.data, "Dataset: JSON array of vectors");
  auto* synth_opt = t->add_option("--synth", train.synth, "Generate a synthetic grid dataset W,H,n");
  data_opt->excludes(synth_opt);
  t->add_option("--schedule", train.schedule, "Noise schedule JSON (path or inline)");
  t->add_option("--out", train.out, "Output model JSON")->required();
  t->add_option("--seed", train.seed, "Seed");
  t->add_option("--epochs", train.epochs, "Epochs (0 writes the initial model)")->check(CLI::NonNegativeNumber);
  t->add_option("--lr", train.lr, "Learning rate");
  t->add_option("--batch", train.batch, "Minibatch size")->check(CLI::PositiveNumber);
  t->add_option("--momentum", train.momentum, "SGD momentum");
  t->add_option("--hidden", train.hidden, "Hidden layer widths")->delimiter(',');

  SampleArgs sample;
  auto* s = app.add_subcommand("sample", "Draw designs, optionally with fitness guidance");
  s->add_option("--denoiser", sample.denoiser, "GMM prior or MLP model JSON")->required();
  s->add_option("--schedule", sample.schedule, "Noise schedule JSON (path or inline)");
  s->add_option("--n", sample.n, "Number of designs");
  s->add_option("--guidance", sample.guidance, "Guidance config JSON (path or inline), or 'none'");
  s->add_option("--fitness", sample.fitness, "Fitness name: flow, metasurface, gmm_toy, linear, quadratic");
  s->add_option("--fitness-params", sample.fitness_params, "Fitness parameters JSON (path or inline)");
  s->add_option("--seed", sample.seed, "Seed");
  s->add_option("--out", sample.out, "Output directory")->required();
  s->add_option("--threads", sample.threads, "Fitness evaluation threads");
  s->add_flag("--states", sample.states, "Write each trajectory with its intermediate states");
  s->add_flag("--diagnostics", sample.diagnostics, "Write per-step guidance diagnostics");

  std::string exp_config, exp_out;
  int exp_threads = 0;
  auto* e = app.add_subcommand("experiment", "Run a paired guided/unguided study");
  e->add_option("--config", exp_config, "Experiment JSON (path or inline)")->required();
  e->add_option("--out", exp_out, "Output directory")->required();
  e->add_option("--threads", exp_threads, "Worker threads (0 = use the config)");

  std::string eval_fitness, eval_params, eval_designs;
  auto* v = app.add_subcommand("eval", "Evaluate design files");
  v->add_option("--fitness", eval_fitness, "Fitness name")->required();
  v->add_option("--fitness-params", eval_params, "Fitness parameters JSON (path or inline)");
  v->add_option("--designs", eval_designs, "Design JSON file or directory of design_*.json")->required();

  std::string plot_summary, plot_out;
  int plot_w = 640, plot_h = 400;
  auto* p = app.add_subcommand("plot", "Render a summary JSON as an SVG histogram");
  p->add_option("--summary", plot_summary, "Summary JSON")->required();
  p->add_option("--out", plot_out, "Output SVG")->required();
  p->add_option("--width", plot_w, "Width in px")->check(CLI::PositiveNumber);
  p->add_option("--height", plot_h, "Height in px")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitConfig;
  }

  try {
    if (t->parsed()) {
      if (train.data.empty() && train.synth.empty()) die(kExitConfig, "train needs --data or --synth");
      return cmd_train(train);
    }
    if (s->parsed()) return cmd_sample(sample);
    if (e->parsed()) return cmd_experiment(exp_config, exp_out, exp_threads);
    if (v->parsed()) return cmd_eval(eval_fitness, eval_params, eval_designs);
    if (p->parsed()) return cmd_plot(plot_summary, plot_out, plot_w, plot_h);
  } catch (const Exit& ex) {
    return ex.code;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}
