#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"

#include "fracbench/drr.hpp"
#include "fracbench/error.hpp"
#include "fracbench/evaluation.hpp"
#include "fracbench/io/config.hpp"
#include "fracbench/io/file.hpp"
#include "fracbench/io/mha.hpp"
#include "fracbench/io/tiff.hpp"
#include "fracbench/parallel.hpp"
#include "fracbench/phantom.hpp"
#include "fracbench/ranking.hpp"
#include "fracbench/rng.hpp"

namespace fracbench::cli {

namespace fs = std::filesystem;
using nlohmann::json;

StudyManifest read_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  const fs::path base = path.parent_path();
  StudyManifest m;
  try {
    m.kind = doc.value("kind", std::string("ct"));
    m.ground_truth = base / doc.at("ground_truth").get<std::string>();
    std::set<std::string> seen;
    for (const json& t : doc.at("teams")) {
      TeamEntry e;
      e.name = t.at("name").get<std::string>();
      e.predictions = base / t.at("predictions").get<std::string>();
      e.runtime_s = t.value("runtime_s", 0.0);
      if (!seen.insert(e.name).second) throw Error(ErrorCode::ParseError, "manifest: duplicate team " + e.name);
      m.teams.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, "manifest: " + std::string(e.what()));
  }
  if (m.kind != "ct" && m.kind != "xray") throw Error(ErrorCode::ParseError, "manifest: kind must be ct or xray");
  return m;
}

namespace {

bool is_case_file(const fs::path& p, bool xray) {
  const std::string ext = p.extension().string();
  return xray ? (ext == ".tif" || ext == ".tiff") : ext == ".mha";
}

std::vector<fs::path> list_cases(const StudyManifest& m) {
  if (!fs::is_directory(m.ground_truth))
    throw Error(ErrorCode::IoError, "ground-truth directory not found: " + m.ground_truth.string());
  std::vector<fs::path> cases;
  for (const auto& entry : fs::directory_iterator(m.ground_truth)) {
    if (entry.is_regular_file() && is_case_file(entry.path(), m.kind == "xray")) cases.push_back(entry.path());
  }
  std::sort(cases.begin(), cases.end());
  return cases;
}

CaseData load_case(const fs::path& path, bool xray) {
  if (xray) return io::read_mask_tiff(path);
  return io::read_mha_labels(path);
}

CaseData empty_like(const CaseData& gt) {
  if (const auto* v = std::get_if<LabelVolume>(&gt)) return LabelVolume(v->grid, 0);
  const auto& m = std::get<MultiLabelMask2D>(gt);
  return MultiLabelMask2D(m.width, m.height);
}

}  // namespace

EvaluateResult evaluate_study(const StudyManifest& manifest, unsigned jobs) {
  const bool xray = manifest.kind == "xray";
  const std::vector<fs::path> cases = list_cases(manifest);
  const std::size_t n_teams = manifest.teams.size();

  std::vector<std::vector<CaseMetrics>> metrics(n_teams, std::vector<CaseMetrics>(cases.size()));
  std::vector<std::vector<std::string>> case_warnings(cases.size());
  parallel_for(cases.size(), jobs, [&](std::size_t c) {
    const CaseData gt = load_case(cases[c], xray);
    for (std::size_t t = 0; t < n_teams; ++t) {
      const fs::path pred_path = manifest.teams[t].predictions / cases[c].filename();
      if (!fs::exists(pred_path)) {
        case_warnings[c].push_back("team " + manifest.teams[t].name + ": missing prediction " + pred_path.string() +
                                   ", scored as empty");
        metrics[t][c] = evaluate_case(gt, empty_like(gt));
        continue;
      }
      metrics[t][c] = evaluate_case(gt, load_case(pred_path, xray));
    }
  });

  EvaluateResult out;
  out.study.kind = manifest.kind;
  for (std::size_t t = 0; t < n_teams; ++t) {
    TeamResult r;
    r.team = manifest.teams[t].name;
    r.mean_runtime_s = manifest.teams[t].runtime_s;
    r.per_case = std::move(metrics[t]);
    for (const fs::path& p : cases) r.case_ids.push_back(p.stem().string());
    out.study.teams.push_back(std::move(r));
  }
  for (auto& w : case_warnings) out.warnings.insert(out.warnings.end(), w.begin(), w.end());
  out.study.warnings = static_cast<int>(out.warnings.size());
  return out;
}

namespace {

struct Options {
  fs::path manifest;
  fs::path out = ".";
  fs::path config;
  fs::path ct;
  fs::path labels;
  fs::path perturb;
  std::optional<std::uint64_t> seed;
  unsigned jobs = 1;
  std::size_t n_samples = 1000;
  int n_views = 20;
  std::string metric = "iou_f";
  bool compress = false;
};

io::Study load_study(const fs::path& path) { return io::parse_study_json(io::read_file(path)); }

void print_leaderboard(const Leaderboard& board, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "%-4s %-20s %9s %9s %9s %9s %9s %9s %9s %10s\n", "rank", "team", "iou_f", "hd95_f",
                "assd_f", "iou_a", "hd95_a", "assd_a", "mean_rank", "runtime_s");
  out << line;
  for (const LeaderboardEntry& e : board.entries) {
    std::snprintf(line, sizeof line, "%-4d %-20s %9.4g %9.4g %9.4g %9.4g %9.4g %9.4g %9.3f %10.4g%s\n", e.final_rank,
                  e.team.c_str(), e.means[0], e.means[1], e.means[2], e.means[3], e.means[4], e.means[5], e.mean_rank,
                  e.runtime_s, e.runtime_tie_break ? "  (runtime tie-break)" : (e.name_tie_break ? "  (name tie-break)" : ""));
    out << line;
  }
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const EvaluateResult r = evaluate_study(read_manifest(o.manifest), o.jobs);
  for (const std::string& w : r.warnings) err << "warning: " << w << '\n';
  fs::create_directories(o.out);
  io::write_file_atomic(o.out / "cases.csv", io::cases_csv(r.study));
  io::write_file_atomic(o.out / "study.json", io::study_json(r.study));
  const std::size_t n_cases = r.study.teams.empty() ? 0 : r.study.teams.front().per_case.size();
  out << "evaluated " << r.study.teams.size() << " teams on " << n_cases << " cases (" << r.warnings.size()
      << " warnings)\n";
  return kExitOk;
}

int cmd_rank(const Options& o, std::ostream& out) {
  const io::Study study = load_study(o.manifest);
  const Leaderboard board = rank_teams(io::study_means(study));
  fs::create_directories(o.out);
  io::write_results(board, o.out / "leaderboard.csv", io::ResultFormat::Csv);
  io::write_results(board, o.out / "leaderboard.json", io::ResultFormat::Json);
  print_leaderboard(board, out);
  return kExitOk;
}

int cmd_bootstrap(const Options& o, std::ostream& out) {
  const io::Study study = load_study(o.manifest);
  if (!study.means_only.empty())
    throw Error(ErrorCode::InvalidArgument, "bootstrap needs per-case metrics, not a means-only study");
  const StabilityReport report = bootstrap_stability(study.teams, o.n_samples, o.seed.value_or(0), o.jobs);
  fs::create_directories(o.out);
  io::write_results(report, o.out / "stability.csv", io::ResultFormat::Csv);
  io::write_results(report, o.out / "stability.json", io::ResultFormat::Json);
  char line[160];
  std::snprintf(line, sizeof line, "kendall tau over %zu samples: mean %.4f, 95%% CI [%.4f, %.4f]\n", report.n_samples,
                report.tau_mean, report.tau_ci_low, report.tau_ci_high);
  out << line;
  return kExitOk;
}

int cmd_significance(const Options& o, std::ostream& out, std::ostream& err) {
  const io::Study study = load_study(o.manifest);
  if (!study.means_only.empty())
    throw Error(ErrorCode::InvalidArgument, "significance needs per-case metrics, not a means-only study");
  const SignificanceMatrix m = significance_matrix(study.teams, metric_from_name(o.metric));
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < m.p.size(); ++i) {
    for (std::size_t j = 0; j < m.p.size(); ++j) degenerate += (i != j && std::isnan(m.p[i][j])) ? 1 : 0;
  }
  if (degenerate > 0) err << "warning: " << degenerate << " team pairs have no usable differences (left empty)\n";
  fs::create_directories(o.out);
  io::write_results(m, o.out / "significance.csv", io::ResultFormat::Csv);
  io::write_results(m, o.out / "significance.json", io::ResultFormat::Json);
  out << "significance matrix for " << o.metric << " over " << m.teams.size() << " teams written\n";
  return kExitOk;
}

int cmd_simulate(const Options& o, std::ostream& out) {
  io::SimulationDocument doc;
  if (!o.config.empty()) doc = io::parse_simulation_config(io::read_file(o.config));
  const std::uint64_t seed = o.seed ? *o.seed : doc.seed.value_or(0);
  doc.config.projection.jobs = o.jobs;
  const IntensityVolume ct = io::read_mha_intensity(o.ct);
  const LabelVolume labels = io::read_mha_labels(o.labels);
  if (o.n_views < 0) throw Error(ErrorCode::InvalidArgument, "--n-views must be non-negative");
  if (o.n_views == 0) {
    out << "no views requested\n";
    return kExitOk;
  }
  fs::create_directories(o.out);
  const MaterialVolume materials = decompose_materials(ct, doc.config.thresholds);
  for (int v = 0; v < o.n_views; ++v) {
    const SimulationResult r =
        simulate_case(materials, labels, doc.config, stream_seed(seed, static_cast<std::uint64_t>(v)));
    char stem[32];
    std::snprintf(stem, sizeof stem, "view_%03d", v);
    io::write_image_tiff(r.xray, o.out / (std::string(stem) + "_image.tif"));
    io::write_mask_tiff(r.mask, o.out / (std::string(stem) + "_mask.tif"));
    io::write_file_atomic(o.out / (std::string(stem) + "_pose.json"), io::camera_json(r.pose));
  }
  out << "simulated " << o.n_views << " views\n";
  return kExitOk;
}

int cmd_phantom(const Options& o, std::ostream& out, std::ostream& err) {
  PhantomSpec spec = o.config.empty() ? PhantomSpec::standard() : io::parse_phantom_spec(io::read_file(o.config));
  if (o.seed) spec.seed = *o.seed;
  const Phantom p = generate_phantom(spec);
  for (const std::string& w : p.warnings) err << "warning: " << w << '\n';
  fs::create_directories(o.out);
  io::write_mha(p.ct, o.out / "ct.mha", o.compress);
  io::write_mha(p.labels, o.out / "gt.mha", o.compress);
  if (!o.perturb.empty()) {
    const PerturbationSpec ps = io::parse_perturbation_spec(io::read_file(o.perturb));
    io::write_mha(perturb(p.labels, ps), o.out / "pred.mha", o.compress);
  }
  out << "phantom with " << list_fragments(p.labels).size() << " fragments written\n";
  return kExitOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Scoring, ranking and simulation tools for pelvic fracture segmentation studies", "fracbench"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  std::vector<CLI::Option*> seed_options;
  auto add_seed = [&](CLI::App* sub) { seed_options.push_back(sub->add_option("--seed", seed, "Random seed")); };
  auto add_jobs = [&](CLI::App* sub) { sub->add_option("--jobs", o.jobs, "Worker threads (0 = all cores)"); };

  auto* evaluate = app.add_subcommand("evaluate", "Score every team's predictions against the ground truth");
  evaluate->add_option("--manifest", o.manifest, "Study manifest (JSON)")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--out", o.out, "Output directory");
  add_jobs(evaluate);

  auto* rank = app.add_subcommand("rank", "Build the leaderboard from a study");
  rank->add_option("--manifest", o.manifest, "study.json from evaluate, or a means-only study")
      ->required()
      ->check(CLI::ExistingFile);
  rank->add_option("--out", o.out, "Output directory");

  auto* bootstrap = app.add_subcommand("bootstrap", "Ranking stability under case resampling");
  bootstrap->add_option("--manifest", o.manifest, "study.json from evaluate")->required()->check(CLI::ExistingFile);
  bootstrap->add_option("--out", o.out, "Output directory");
  bootstrap->add_option("--n-samples", o.n_samples, "Bootstrap samples");
  add_seed(bootstrap);
  add_jobs(bootstrap);

  auto* significance = app.add_subcommand("significance", "Pairwise one-sided Wilcoxon tests");
  significance->add_option("--manifest", o.manifest, "study.json from evaluate")->required()->check(CLI::ExistingFile);
  significance->add_option("--out", o.out, "Output directory");
  significance->add_option("--metric", o.metric, "Metric column (iou_f, hd95_f, ...)");

  auto* simulate = app.add_subcommand("simulate", "Simulate radiographs and projected masks from a CT");
  simulate->add_option("--ct", o.ct, "CT volume (.mha, HU)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--labels", o.labels, "Fragment labels (.mha)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--config", o.config, "Simulation config (JSON)")->check(CLI::ExistingFile);
  simulate->add_option("--n-views", o.n_views, "Number of views");
  simulate->add_option("--out", o.out, "Output directory");
  add_seed(simulate);
  add_jobs(simulate);

  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic fractured-pelvis phantom");
  phantom->add_option("--config", o.config, "Phantom spec (JSON)")->check(CLI::ExistingFile);
  phantom->add_option("--perturb", o.perturb, "Perturbation spec (JSON); also writes pred.mha")
      ->check(CLI::ExistingFile);
  phantom->add_option("--out", o.out, "Output directory");
  phantom->add_flag("--compress", o.compress, "zlib-compress the MHA payloads");
  add_seed(phantom);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }
  for (const CLI::Option* opt : seed_options) {
    if (opt->count() > 0) o.seed = seed;
  }

  try {
    if (evaluate->parsed()) return cmd_evaluate(o, out, err);
    if (rank->parsed()) return cmd_rank(o, out);
    if (bootstrap->parsed()) return cmd_bootstrap(o, out);
    if (significance->parsed()) return cmd_significance(o, out, err);
    if (simulate->parsed()) return cmd_simulate(o, out);
    if (phantom->parsed()) return cmd_phantom(o, out, err);
  } catch (const Error& e) {
    err << "error [" << to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitInputError;
  } catch (const fs::filesystem_error& e) {
    err << "error [IoError]: " << e.what() << '\n';
    return kExitInputError;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternalError;
  }
  return kExitInternalError;
}

}  // namespace fracbench::cli
