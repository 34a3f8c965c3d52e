#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "motionseg/config.hpp"
#include "motionseg/gradcheck.hpp"
#include "motionseg/hdbscan.hpp"
#include "motionseg/io.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/pseudo_label.hpp"
#include "motionseg/quasi_static.hpp"
#include "motionseg/synth.hpp"
#include "motionseg/training.hpp"

namespace fs = std::filesystem;
using namespace motionseg;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs fn(i) for i in [0, n) on `jobs` threads; the first exception (lowest
// index) is rethrown after all workers finish.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

struct Globals {
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string config_path;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* jobs_opt = nullptr;

  RunConfig load() const {
    RunConfig cfg;
    if (!config_path.empty()) cfg = load_run_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
    if (jobs_opt->count() > 0) cfg.jobs = jobs;
    cfg.validate();
    return cfg;
  }
};

// ---------------------------------------------------------------- commands

struct RetrieveArgs {
  std::string flow_dir;
  std::string out;
  std::optional<double> tau;
};

int cmd_retrieve_static(const Globals& g, const RetrieveArgs& a) {
  auto cfg = g.load();
  if (a.tau) cfg.tau_static = *a.tau;
  const auto files = list_files(a.flow_dir, ".flo");
  struct Row {
    bool ok = false;
    bool keep = false;
    CornerStats stats;
    std::string error;
  };
  std::vector<Row> rows(files.size());
  parallel_for(files.size(), cfg.jobs, [&](std::size_t i) {
    try {
      rows[i].stats = corner_stats(read_flo(files[i]), cfg.patch_fraction);
      rows[i].keep = is_quasi_static(rows[i].stats, cfg.tau_static);
      rows[i].ok = true;
    } catch (const Error& e) {
      rows[i].error = e.what();
    }
  });
  std::string manifest;
  int failures = 0;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const auto name = files[i].filename().string();
    if (!rows[i].ok) {
      ++failures;
      std::cerr << name << "\terror\t" << rows[i].error << "\n";
      continue;
    }
    const auto& m = rows[i].stats.mean_magnitudes;
    std::cout << name << '\t' << (rows[i].keep ? "static" : "moving") << '\t' << fixed6(m[0]) << ' '
              << fixed6(m[1]) << ' ' << fixed6(m[2]) << ' ' << fixed6(m[3]) << "\n";
    if (rows[i].keep) manifest += files[i].string() + "\n";
  }
  write_text(a.out, manifest);
  return failures ? kExitData : kExitOk;
}

struct PseudoArgs {
  std::string flow;
  std::string manifest;
  std::string out_dir;
};

int cmd_pseudo_label(const Globals& g, const PseudoArgs& a) {
  const auto cfg = g.load();
  if (a.flow.empty() == a.manifest.empty()) throw UsageError("give exactly one of --flow or --manifest");
  std::vector<fs::path> frames;
  if (!a.flow.empty()) {
    frames.emplace_back(a.flow);
  } else {
    std::istringstream in(read_text(a.manifest));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty() && line.front() != '#') frames.emplace_back(line);
    }
  }
  fs::create_directories(a.out_dir);
  struct Row {
    int instances = 0;
    std::size_t fg_pixels = 0;
  };
  std::vector<Row> rows(frames.size());
  parallel_for(frames.size(), cfg.jobs, [&](std::size_t i) {
    const auto label = generate_pseudo_label(read_flo(frames[i]), cfg.pseudo, frames[i].stem().string());
    const fs::path base = fs::path(a.out_dir) / frames[i].stem();
    write_label_map(label.instances, base.string() + ".pgm");
    write_binary_mask(label.fg, base.string() + "_fg.pgm");
    rows[i] = {label.instances.instance_count(), count(label.fg)};
  });
  json summary;
  summary["frames"] = json::array();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    summary["frames"].push_back({{"name", frames[i].stem().string()},
                                 {"instances", rows[i].instances},
                                 {"fg_pixels", rows[i].fg_pixels}});
    std::cout << frames[i].stem().string() << '\t' << rows[i].instances << "\n";
  }
  write_text(fs::path(a.out_dir) / "summary.json", summary.dump(2) + "\n");
  return kExitOk;
}

struct ClusterArgs {
  std::string csv;
  std::string out;
  std::optional<int> min_cluster_size;
  std::optional<int> min_samples;
};

PointSet read_csv_points(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<double> data;
  int dim = -1;
  int rows = 0;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> row;
    std::stringstream cells(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(cells, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (rows == 0 && dim < 0) continue;  // header
      throw Error(ErrorCode::InvalidArgument, "csv line " + std::to_string(line_no) + ": not numeric");
    }
    if (dim < 0) dim = static_cast<int>(row.size());
    if (static_cast<int>(row.size()) != dim) {
      throw Error(ErrorCode::DimensionMismatch, "csv line " + std::to_string(line_no) + ": wrong column count");
    }
    for (double v : row) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "csv line " + std::to_string(line_no));
    }
    data.insert(data.end(), row.begin(), row.end());
    ++rows;
  }
  return PointSet(rows, std::max(dim, 1), std::move(data));
}

int cmd_cluster(const Globals& g, const ClusterArgs& a) {
  const auto cfg = g.load();
  auto params = cfg.pseudo.clustering;
  if (a.min_cluster_size) params.min_cluster_size = *a.min_cluster_size;
  if (a.min_samples) params.min_samples = *a.min_samples;
  if (params.min_cluster_size < 2 || params.min_samples < 1) {
    throw UsageError("min_cluster_size must be >= 2 and min_samples >= 1");
  }
  const auto points = read_csv_points(a.csv);
  const auto result = hdbscan(points, params);
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < result.labels.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(result.labels[i]) + "\n";
  }
  if (a.out.empty()) {
    std::cout << out;
  } else {
    write_text(a.out, out);
  }
  std::cerr << "clusters " << result.cluster_count() << " noise " << result.noise_count() << "\n";
  return kExitOk;
}

struct EvaluateArgs {
  std::string pred_dir;
  std::string gt_dir;
  std::string out;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a) {
  g.load();
  const auto report = evaluate_dataset(a.pred_dir, a.gt_dir);
  const auto text = to_json(report).dump(2) + "\n";
  if (a.out.empty()) {
    std::cout << text;
  } else {
    write_text(a.out, text);
    std::cout << "F1_50 " << fixed6(report.f1_50) << " AP_50 " << fixed6(report.ap_50) << " AR_50 "
              << fixed6(report.ar_50) << " all_ARI " << fixed6(report.all_ari) << "\n";
  }
  return kExitOk;
}

struct SynthArgs {
  std::string spec;
  std::string out_dir;
  int count = 0;
  double panning_fraction = 0.0;
  double noise = 0.2;
  int width = 96;
  int height = 96;
};

void write_scene(const SceneSpec& spec, const fs::path& flow, const fs::path& gt, const fs::path& fg,
                 const fs::path& echo) {
  const auto scene = render(spec);
  write_flo(scene.flow, flow);
  write_label_map(scene.gt, gt);
  write_binary_mask(scene.gt_fg, fg);
  write_text(echo, format_scene_spec(spec));
}

int cmd_synth_gen(const Globals& g, const SynthArgs& a) {
  const auto cfg = g.load();
  if (a.spec.empty() == (a.count == 0)) throw UsageError("give exactly one of --spec or --count");
  const fs::path out(a.out_dir);
  fs::create_directories(out);
  if (!a.spec.empty()) {
    const auto spec = load_scene_spec(a.spec);
    write_scene(spec, out / "flow.flo", out / "gt.pgm", out / "fg.pgm", out / "scene.txt");
    return kExitOk;
  }
  if (a.count < 0) throw UsageError("--count must be positive");
  if (a.panning_fraction < 0.0 || a.panning_fraction > 1.0) throw UsageError("--panning-fraction in [0, 1]");
  MoverSceneOptions options;
  options.width = a.width;
  options.height = a.height;
  options.noise_sigma = a.noise;
  // Specs are drawn serially so the scene set does not depend on --jobs.
  std::mt19937_64 rng(cfg.seed);
  const int panning = static_cast<int>(std::lround(a.panning_fraction * a.count));
  std::vector<SceneSpec> specs;
  for (int i = 0; i < a.count; ++i) {
    specs.push_back(i < a.count - panning ? sample_mover_scene(rng, options)
                                          : sample_panning_scene(rng, options, 2.0, 10.0));
  }
  for (const char* sub : {"flow", "gt", "fg", "spec"}) fs::create_directories(out / sub);
  parallel_for(specs.size(), cfg.jobs, [&](std::size_t i) {
    char name[16];
    std::snprintf(name, sizeof name, "%06zu", i);
    write_scene(specs[i], out / "flow" / (std::string(name) + ".flo"), out / "gt" / (std::string(name) + ".pgm"),
                out / "fg" / (std::string(name) + ".pgm"), out / "spec" / (std::string(name) + ".txt"));
  });
  return kExitOk;
}

struct TrainArgs {
  std::string out_dir;
};

int cmd_train_deactivator(const Globals& g, const TrainArgs& a) {
  const auto cfg = g.load();
  std::mt19937_64 seeds(cfg.seed);
  Stage2FixtureOptions fo;
  fo.count = cfg.fixture_count;
  fo.scene.width = cfg.fixture_width;
  fo.scene.height = cfg.fixture_height;
  fo.slots.slots = cfg.slots;
  fo.slots.slot_dim = cfg.slot_dim;
  fo.slots.separation = cfg.fixture_separation;
  fo.slots.direction_seed = seeds();
  fo.pseudo = cfg.pseudo;
  fo.seed = seeds();
  const auto samples = make_stage2_fixtures(fo);

  DeactivationMlp mlp(cfg.slot_dim, cfg.mlp_hidden, cfg.mlp_layers, seeds());
  Stage2Options so;
  so.lr = cfg.stage2_lr;
  so.epochs = cfg.stage2_epochs;
  so.batch_size = cfg.batch_size;
  so.drop_gating = cfg.drop_gating;
  so.loss = cfg.loss;
  so.shuffle_seed = seeds();
  const double initial_accuracy = slot_accuracy(mlp, samples);
  const auto log = train_deactivator(mlp, samples, so);
  const auto report = evaluate_deactivator(mlp, samples);

  const fs::path out(a.out_dir);
  fs::create_directories(out);
  mlp.save(out / "deactivator.mrdc");
  std::string csv = "epoch,loss,slot_accuracy\n";
  csv += "0,," + fixed6(initial_accuracy) + "\n";
  for (const auto& e : log) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%d,%.9g,%.6f\n", e.epoch, e.mean_loss, e.slot_accuracy);
    csv += buf;
    std::cout << "epoch " << e.epoch << " loss " << fixed6(e.mean_loss) << " accuracy "
              << fixed6(e.slot_accuracy) << "\n";
  }
  write_text(out / "train_log.csv", csv);
  json summary;
  summary["samples"] = samples.size();
  summary["epochs"] = cfg.stage2_epochs;
  summary["slot_accuracy"] = log.empty() ? initial_accuracy : log.back().slot_accuracy;
  summary["f1_50"] = report.f1_50;
  summary["ap_50"] = report.ap_50;
  summary["ar_50"] = report.ar_50;
  write_text(out / "summary.json", summary.dump(2) + "\n");
  write_text(out / "config.txt", format_run_config(cfg));
  return kExitOk;
}

struct GradcheckArgs {
  int instances = 100;
  double h = 1e-5;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const auto cfg = g.load();
  if (a.instances < 1 || !(a.h > 0.0)) throw UsageError("--instances >= 1 and --step > 0 required");
  const auto r = run_gradcheck(a.instances, cfg.seed, a.h);
  char buf[256];
  std::snprintf(buf, sizeof buf, "wbce %.3e\nfg_bg_loss %.3e\nmlp_backward %.3e\n", r.wbce, r.fg_bg, r.mlp);
  std::cout << buf;
  const bool ok = r.wbce < a.tolerance && r.fg_bg < a.tolerance && r.mlp < a.tolerance;
  return ok ? kExitOk : kExitData;
}

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::BadConfig:
    case ErrorCode::InvalidArgument:
      return kExitUsage;
    default:
      return kExitData;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion-based pseudo-labels, slot deactivation and discovery metrics"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  g.seed_opt = app.add_option("--seed", g.seed, "Random seed");
  g.jobs_opt = app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--config", g.config_path, "key = value run config")->check(CLI::ExistingFile);

  RetrieveArgs retrieve;
  auto* rs = app.add_subcommand("retrieve-static", "Keep quasi-static frames of a .flo directory");
  rs->add_option("--flow-dir", retrieve.flow_dir)->required();
  rs->add_option("--out", retrieve.out, "Manifest path")->required();
  rs->add_option("--tau", retrieve.tau, "Override tau_static");

  PseudoArgs pseudo;
  auto* pl = app.add_subcommand("pseudo-label", "Instance pseudo-labels from flow");
  pl->add_option("--flow", pseudo.flow, "Single .flo file");
  pl->add_option("--manifest", pseudo.manifest, "Manifest from retrieve-static");
  pl->add_option("--out-dir", pseudo.out_dir)->required();

  ClusterArgs cluster;
  auto* cl = app.add_subcommand("cluster", "HDBSCAN over CSV points");
  cl->add_option("--csv", cluster.csv)->required()->check(CLI::ExistingFile);
  cl->add_option("--out", cluster.out);
  cl->add_option("--min-cluster-size", cluster.min_cluster_size);
  cl->add_option("--min-samples", cluster.min_samples);

  EvaluateArgs evaluate;
  auto* ev = app.add_subcommand("evaluate", "F1/AP/AR at IoU 0.5 and ARI over label maps");
  ev->add_option("--pred-dir", evaluate.pred_dir)->required();
  ev->add_option("--gt-dir", evaluate.gt_dir)->required();
  ev->add_option("--out", evaluate.out, "report.json path (default stdout)");

  SynthArgs synth;
  auto* sg = app.add_subcommand("synth-gen", "Render synthetic flow scenes");
  sg->add_option("--spec", synth.spec, "Scene spec file")->check(CLI::ExistingFile);
  sg->add_option("--count", synth.count, "Number of random scenes");
  sg->add_option("--panning-fraction", synth.panning_fraction);
  sg->add_option("--noise", synth.noise);
  sg->add_option("--width", synth.width)->check(CLI::Range(16, 4096));
  sg->add_option("--height", synth.height)->check(CLI::Range(16, 4096));
  sg->add_option("--out-dir", synth.out_dir)->required();

  TrainArgs train;
  auto* td = app.add_subcommand("train-deactivator", "Stage-2 training on generated slot fixtures");
  td->add_option("--out-dir", train.out_dir)->required();

  GradcheckArgs gradcheck;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference checks of the analytic gradients");
  gc->add_option("--instances", gradcheck.instances);
  gc->add_option("--step", gradcheck.h, "Finite-difference step");
  gc->add_option("--tolerance", gradcheck.tolerance);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*rs) return cmd_retrieve_static(g, retrieve);
    if (*pl) return cmd_pseudo_label(g, pseudo);
    if (*cl) return cmd_cluster(g, cluster);
    if (*ev) return cmd_evaluate(g, evaluate);
    if (*sg) return cmd_synth_gen(g, synth);
    if (*td) return cmd_train_deactivator(g, train);
    if (*gc) return cmd_gradcheck(g, gradcheck);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
