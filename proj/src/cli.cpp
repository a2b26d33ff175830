#include "ssal/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ssal/box_bank.hpp"
#include "ssal/cal_selector.hpp"
#include "ssal/calibration.hpp"
#include "ssal/errors.hpp"
#include "ssal/io.hpp"
#include "ssal/parallel.hpp"
#include "ssal/pseudo_scene.hpp"
#include "ssal/simulator.hpp"

namespace ssal {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_out) {
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--threads", c.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  auto* out = cmd->add_option("--out", c.out, "Output directory");
  if (needs_out) out->required();
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

PointCloud load_scene_points(const std::string& dir, const std::string& id) {
  const fs::path p = fs::path(dir) / (id + ".bin");
  return fs::exists(p) ? load_point_cloud(p) : PointCloud{};
}

std::map<std::string, std::vector<Detection>> read_grouped(const std::string& path, Source source) {
  return group_by_scene(read_detections(path, source));
}

// Linear-interpolated quantile of sorted values.
double quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// ---- select ----------------------------------------------------------------------

struct SelectArgs {
  std::string pool, scenes, normal, cpsp, labels;
  SelectionConfig selection;
  CandidateOptions candidates;
  int ignore_max_hits = 2;
  bool no_cbs = false, no_div = false;
  Common common;
};

int cmd_select(const SelectArgs& a, std::ostream& out) {
  const PoolManifest manifest = read_pool_manifest(a.pool);
  const int C = manifest.classes.size();
  const auto normal = read_grouped(a.normal, Source::NormalModel);
  const auto cpsp = read_grouped(a.cpsp, Source::CpspModel);

  const std::vector<std::string> ids(manifest.pool.unlabeled().begin(), manifest.pool.unlabeled().end());
  std::map<std::string, PointCloud> points;
  for (const auto& id : ids) points[id] = load_scene_points(a.scenes, id);
  const auto all = make_candidates(ids, normal, cpsp, points, a.candidates, a.common.threads);

  std::vector<Scene> scenes;
  std::map<std::string, std::vector<Detection>> ensembles;
  for (const auto& c : all) {
    Scene s;
    s.scene_id = c.scene_id;
    if (auto it = manifest.ignore_regions.find(c.scene_id); it != manifest.ignore_regions.end())
      s.ignore_regions = it->second;
    scenes.push_back(std::move(s));
    ensembles[c.scene_id] = c.ensemble;
  }
  const auto kept_ids = filter_ignore_frames(scenes, ensembles, a.ignore_max_hits);
  const std::set<std::string> kept(kept_ids.begin(), kept_ids.end());
  std::vector<Candidate> pool;
  std::vector<std::string> filtered;
  for (const auto& c : all) {
    if (kept.count(c.scene_id))
      pool.push_back(c);
    else
      filtered.push_back(c.scene_id);
  }

  std::vector<double> counts(C, 0.0);
  if (!a.labels.empty()) {
    for (const auto& d : read_detections(a.labels, Source::GroundTruth))
      if (manifest.pool.labeled().count(d.scene_id)) counts[d.class_id] += 1.0;
  }
  SelectionConfig cfg = a.selection;
  cfg.seed = a.common.seed;
  cfg.class_balance = !a.no_cbs;
  cfg.diversity = !a.no_div;
  cfg.validate();
  const auto caps = class_caps(counts, cfg.budget_boxes, cfg.min_cap);
  const SelectionResult result = select(pool, C, caps, cfg, a.common.threads);

  const fs::path dir(a.common.out);
  json selected{{"selected", result.chosen}, {"exhausted", result.exhausted}, {"num_boxes", result.num_boxes}};
  json report = selection_report_json(result, manifest.classes);
  report["filtered_ignore_frames"] = filtered;
  report["labeled_counts"] = counts;
  write_text(dir / "selected.json", dump(selected));
  write_text(dir / "report.json", dump(report));
  write_text(dir / "summary.csv", selection_summary_csv(result, manifest.classes));
  out << "selected " << result.chosen.size() << " scenes, " << result.num_boxes << " counted boxes"
      << (result.exhausted ? " (pool exhausted)" : "") << "\n";
  return result.exhausted ? kExitExhausted : kExitOk;
}

// ---- bank ------------------------------------------------------------------------

struct BankArgs {
  std::string bank, candidates, scenes, dets, gt, pool;
  int k = 20;
  double fp_floor = 0.5;
  double overlap = kDefaultOverlap;
  int stale_rounds = kDefaultStaleRounds;  // negative: never stale
  std::vector<std::string> revisited;
  Common common;
};

int cmd_bank_extract(const BankArgs& a, std::ostream& out) {
  BoxBank bank = a.bank.empty() ? BoxBank{} : load_bank(a.bank);
  const auto dets = read_grouped(a.dets, Source::CpspModel);
  const auto gt = a.gt.empty() ? std::map<std::string, std::vector<Detection>>{}
                               : read_grouped(a.gt, Source::GroundTruth);
  std::vector<std::string> ids;
  for (const auto& [id, d] : dets) ids.push_back(id);
  std::vector<std::vector<BankEntry>> found(ids.size());
  parallel_for(ids.size(), a.common.threads, [&](std::size_t i) {
    Scene scene;
    scene.scene_id = ids[i];
    scene.points = load_scene_points(a.scenes, ids[i]);
    const auto& d = dets.at(ids[i]);
    found[i] = extract_confident(scene, d, a.k, mix_seed(a.common.seed, hash_string(ids[i])));
    if (!a.gt.empty()) {
      auto it = gt.find(ids[i]);
      scene.gt = it != gt.end() ? it->second : std::vector<Detection>{};
      auto fps = mine_false_positives(scene, d, a.fp_floor);
      found[i].insert(found[i].end(), fps.begin(), fps.end());
    }
  });
  std::size_t added = 0;
  for (auto& f : found) {
    added += f.size();
    append_entries(bank, std::move(f));
  }
  persist(bank, a.common.out);
  out << "extracted " << added << " entries, bank holds " << bank.entries.size() << "\n";
  return kExitOk;
}

int cmd_bank_refine(const BankArgs& a, std::ostream& out) {
  const BoxBank bank = load_bank(a.bank);
  const BoxBank cand = load_bank(a.candidates);
  RefineOptions opt;
  opt.overlap = a.overlap;
  opt.stale_rounds = a.stale_rounds < 0 ? kNeverStale : a.stale_rounds;
  if (!a.revisited.empty()) opt.revisited_scenes = std::set<std::string>(a.revisited.begin(), a.revisited.end());
  const BoxBank refined = refine(bank, cand.entries, opt);
  persist(refined, a.common.out);
  out << "refined bank: " << bank.entries.size() << " + " << cand.entries.size() << " -> "
      << refined.entries.size() << " entries (round " << refined.round << ")\n";
  return kExitOk;
}

int cmd_bank_stats(const BankArgs& a, std::ostream& out) {
  const BoxBank bank = load_bank(a.bank);
  std::vector<std::string> names;
  if (!a.pool.empty()) names = read_pool_manifest(a.pool).classes.names;
  std::map<int, int> per_class;
  std::vector<double> scores;
  int fp = 0;
  for (const auto& e : bank.entries) {
    ++per_class[e.cls];
    scores.push_back(e.score);
    fp += e.is_fp;
  }
  std::sort(scores.begin(), scores.end());
  json classes = json::object();
  for (const auto& [c, n] : per_class)
    classes[c < static_cast<int>(names.size()) ? names[c] : std::to_string(c)] = n;
  json q = json::object();
  for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) q[std::to_string(static_cast<int>(p * 100))] = quantile(scores, p);
  const json stats{{"entries", bank.entries.size()}, {"fp_entries", fp},   {"round", bank.round},
                   {"classes", classes},             {"score_quantiles", q}};
  out << dump(stats);
  if (!a.common.out.empty()) write_text(fs::path(a.common.out) / "stats.json", dump(stats));
  return kExitOk;
}

// ---- compose ---------------------------------------------------------------------

struct ComposeArgs {
  std::string bank, scenes, pool;
  std::vector<std::string> dets;
  int max_objects = 8;
  int count = 0;  // 0: one pseudo-scene per background
  double removal_floor = kDefaultRemovalFloor;
  Common common;
};

int cmd_compose(const ComposeArgs& a, std::ostream& out) {
  const BoxBank bank = load_bank(a.bank);
  std::vector<std::string> ids;
  int C = 1;
  if (!a.pool.empty()) {
    const auto manifest = read_pool_manifest(a.pool);
    ids.assign(manifest.pool.unlabeled().begin(), manifest.pool.unlabeled().end());
    C = manifest.classes.size();
  } else {
    for (const auto& entry : fs::directory_iterator(a.scenes))
      if (entry.path().extension() == ".bin") ids.push_back(entry.path().stem().string());
    std::sort(ids.begin(), ids.end());
    for (const auto& e : bank.entries) C = std::max(C, e.cls + 1);
  }
  if (a.count > 0 && static_cast<std::size_t>(a.count) < ids.size()) ids.resize(a.count);

  std::map<std::string, std::vector<Detection>> dets;
  for (const auto& path : a.dets)
    for (auto& [id, d] : read_grouped(path, Source::Surrogate))
      dets[id].insert(dets[id].end(), d.begin(), d.end());

  std::vector<PseudoScene> pseudo(ids.size());
  parallel_for(ids.size(), a.common.threads, [&](std::size_t j) {
    std::vector<Box3D> keep_fp;
    for (const auto& e : bank.entries)
      if (e.is_fp && e.scene_id == ids[j]) keep_fp.push_back(e.loc);
    auto it = dets.find(ids[j]);
    const std::vector<Detection> none;
    const auto bg = mine_background(load_scene_points(a.scenes, ids[j]), it != dets.end() ? it->second : none,
                                    a.removal_floor, kDefaultPointMargin, keep_fp);
    pseudo[j] = compose(bg, bank, a.max_objects, mix_seed(a.common.seed, j), ids[j] + "_pseudo", C);
  });
  emit_dataset(pseudo, a.common.out);
  std::size_t labels = 0;
  for (const auto& p : pseudo) labels += p.pseudo_labels.size();
  out << "composed " << pseudo.size() << " pseudo-scenes with " << labels << " pseudo-labels\n";
  return kExitOk;
}

// ---- calib -----------------------------------------------------------------------

struct CalibArgs {
  std::string dets, gt;
  std::vector<double> edges = default_bin_edges();
  double match_iou = kDefaultMatchFloor;
  Common common;
};

int cmd_calib(const CalibArgs& a, std::ostream& out) {
  const auto dets = read_grouped(a.dets, Source::Surrogate);
  const auto gt = read_grouped(a.gt, Source::GroundTruth);
  std::vector<Detection> flat;
  std::vector<bool> matches;
  const std::vector<Detection> none;
  for (const auto& [id, d] : dets) {
    auto it = gt.find(id);
    const auto m = match_predictions(d, it != gt.end() ? it->second : none, a.match_iou);
    flat.insert(flat.end(), d.begin(), d.end());
    matches.insert(matches.end(), m.begin(), m.end());
  }
  const auto rep = reliability(flat, matches, a.edges);
  json bins = json::array();
  for (const auto& b : rep.bins)
    bins.push_back({{"lo", b.lo},
                    {"hi", b.hi},
                    {"count", b.count},
                    {"true_positives", b.true_positives},
                    {"mean_confidence", b.mean_confidence},
                    {"precision", b.precision}});
  const json j{{"d_ece", rep.d_ece}, {"total", rep.total}, {"edges", rep.edges}, {"bins", bins}};
  const fs::path dir(a.common.out);
  write_text(dir / "reliability.json", dump(j));
  write_text(dir / "reliability.csv", reliability_csv(rep));
  out << "d_ece " << rep.d_ece << " over " << rep.total << " detections\n";
  return kExitOk;
}

// ---- sim -------------------------------------------------------------------------

struct SimArgs {
  WorldConfig world;
  int labeled = 10;
  std::string normal_mode = "overconfident", cpsp_mode = "calibrated";
  RoundsConfig rounds;
  bool no_random = false, no_cbs = false, no_div = false;
  Common common;
};

void add_world_options(CLI::App* cmd, SimArgs& a) {
  cmd->add_option("--scenes", a.world.n_scenes, "Number of scenes")->capture_default_str();
  cmd->add_option("--mix", a.world.class_mix, "Class frequencies (Car,Pedestrian,Cyclist)")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--min-objects", a.world.min_objects)->capture_default_str();
  cmd->add_option("--max-objects", a.world.max_objects)->capture_default_str();
  cmd->add_option("--normal-calibration", a.normal_mode, "calibrated|overconfident|underconfident")
      ->capture_default_str();
  cmd->add_option("--cpsp-calibration", a.cpsp_mode)->capture_default_str();
}

int cmd_sim_gen(const SimArgs& a, std::ostream& out) {
  FixtureConfig fc;
  fc.world = a.world;
  fc.world.seed = a.common.seed;
  fc.labeled_scenes = a.labeled;
  fc.normal_mode = calibration_mode_from_string(a.normal_mode);
  fc.cpsp_mode = calibration_mode_from_string(a.cpsp_mode);
  fc.seed = a.common.seed;
  const Fixture fx = make_fixture(fc, a.common.threads);
  write_fixture(fx, a.common.out);
  out << "wrote " << fx.world.scenes.size() << " scenes (" << fx.pool.labeled().size() << " labeled)\n";
  return kExitOk;
}

int cmd_sim_run(const SimArgs& a, std::ostream& out) {
  WorldConfig wc = a.world;
  wc.seed = a.common.seed;
  wc.validate();
  const World world = gen_world(wc, a.common.threads);
  const auto normal = long_tail_skill(wc, calibration_mode_from_string(a.normal_mode), mix_seed(a.common.seed, 1));
  const auto cpsp = long_tail_skill(wc, calibration_mode_from_string(a.cpsp_mode), mix_seed(a.common.seed, 2));
  RoundsConfig rc = a.rounds;
  rc.seed = a.common.seed;
  rc.selection.seed = a.common.seed;
  rc.selection.class_balance = !a.no_cbs;
  rc.selection.diversity = !a.no_div;
  rc.random_baseline = !a.no_random;
  rc.threads = a.common.threads;
  const RoundsReport report = run_rounds(world, normal, cpsp, rc);
  const fs::path dir(a.common.out);
  write_text(dir / "rounds.json", dump(rounds_report_json(report, world.classes)));
  write_text(dir / "rounds.csv", rounds_report_csv(report, world.classes));
  out << "ran " << report.cal.rounds.size() << " rounds over " << world.scenes.size() << " scenes\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semi-supervised active learning selection toolkit for 3D detection"};
  app.set_config("--config", "", "TOML/INI config file; command-line flags take precedence");
  app.require_subcommand(1);
  std::function<int()> action;

  SelectArgs sel;
  auto* select_cmd = app.add_subcommand("select", "Budgeted scene selection over the unlabeled pool");
  select_cmd->add_option("--pool", sel.pool, "Pool manifest JSON")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--scenes", sel.scenes, "Directory of <scene_id>.bin point clouds")
      ->required()
      ->check(CLI::ExistingDirectory);
  select_cmd->add_option("--normal", sel.normal, "Normal-model detections (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--cpsp", sel.cpsp, "CPSP-model detections (JSONL)")->required()->check(CLI::ExistingFile);
  select_cmd->add_option("--labels", sel.labels, "Annotated boxes of the labeled scenes (JSONL)")
      ->check(CLI::ExistingFile);
  select_cmd->add_option("--budget", sel.selection.budget_boxes, "Box budget b")->capture_default_str();
  select_cmd->add_option("--t-sim", sel.selection.t_sim, "Similarity threshold")->capture_default_str();
  select_cmd->add_option("--reduced-weight", sel.selection.reduced_weight)->capture_default_str();
  select_cmd->add_option("--min-cap", sel.selection.min_cap)->capture_default_str();
  select_cmd->add_option("--bank-size", sel.selection.diversity_bank_size, "Feature bank size m")
      ->capture_default_str();
  select_cmd->add_option("--conf-thresh", sel.candidates.conf_thresh)->capture_default_str();
  select_cmd->add_option("--nms-iou", sel.candidates.nms_iou)->capture_default_str();
  select_cmd->add_option("--match-iou", sel.candidates.match_iou)->capture_default_str();
  select_cmd->add_option("--ignore-max-hits", sel.ignore_max_hits)->capture_default_str();
  select_cmd->add_flag("--no-cbs", sel.no_cbs, "Disable class-balance sampling");
  select_cmd->add_flag("--no-diversity", sel.no_div, "Disable the similarity skip");
  add_common(select_cmd, sel.common, true);
  select_cmd->callback([&] { action = [&] { return cmd_select(sel, out); }; });

  BankArgs bank;
  auto* bank_cmd = app.add_subcommand("bank", "Box bank maintenance");
  bank_cmd->require_subcommand(1);
  auto* extract_cmd = bank_cmd->add_subcommand("extract", "Harvest confident objects into a bank");
  extract_cmd->add_option("--scenes", bank.scenes)->required()->check(CLI::ExistingDirectory);
  extract_cmd->add_option("--dets", bank.dets, "Detections (JSONL)")->required()->check(CLI::ExistingFile);
  extract_cmd->add_option("--gt", bank.gt, "Verified boxes for false-positive mining (JSONL)")
      ->check(CLI::ExistingFile);
  extract_cmd->add_option("--bank", bank.bank, "Existing bank to append to")->check(CLI::ExistingDirectory);
  extract_cmd->add_option("--k", bank.k, "Clusters per scene")->capture_default_str();
  extract_cmd->add_option("--fp-floor", bank.fp_floor)->capture_default_str();
  add_common(extract_cmd, bank.common, true);
  extract_cmd->callback([&] { action = [&] { return cmd_bank_extract(bank, out); }; });

  auto* refine_cmd = bank_cmd->add_subcommand("refine", "Merge candidate entries into a bank");
  refine_cmd->add_option("--bank", bank.bank)->required()->check(CLI::ExistingDirectory);
  refine_cmd->add_option("--candidates", bank.candidates, "Bank directory holding new entries")
      ->required()
      ->check(CLI::ExistingDirectory);
  refine_cmd->add_option("--overlap", bank.overlap)->capture_default_str();
  refine_cmd->add_option("--stale-rounds", bank.stale_rounds, "Negative disables staleness")->capture_default_str();
  refine_cmd->add_option("--revisited", bank.revisited, "Scenes revisited this round (default: candidate scenes)")
      ->delimiter(',');
  add_common(refine_cmd, bank.common, true);
  refine_cmd->callback([&] { action = [&] { return cmd_bank_refine(bank, out); }; });

  auto* stats_cmd = bank_cmd->add_subcommand("stats", "Per-class counts and score quantiles");
  stats_cmd->add_option("--bank", bank.bank)->required()->check(CLI::ExistingDirectory);
  stats_cmd->add_option("--pool", bank.pool, "Pool manifest for class names")->check(CLI::ExistingFile);
  add_common(stats_cmd, bank.common, false);
  stats_cmd->callback([&] { action = [&] { return cmd_bank_stats(bank, out); }; });

  ComposeArgs comp;
  auto* compose_cmd = app.add_subcommand("compose", "Build pseudo-scenes from backgrounds and the bank");
  compose_cmd->add_option("--bank", comp.bank)->required()->check(CLI::ExistingDirectory);
  compose_cmd->add_option("--scenes", comp.scenes)->required()->check(CLI::ExistingDirectory);
  compose_cmd->add_option("--pool", comp.pool, "Pool manifest; backgrounds come from its unlabeled scenes")
      ->check(CLI::ExistingFile);
  compose_cmd->add_option("--dets", comp.dets, "Detections removed from backgrounds (JSONL, repeatable)")
      ->check(CLI::ExistingFile);
  compose_cmd->add_option("--max-objects", comp.max_objects)->capture_default_str();
  compose_cmd->add_option("--count", comp.count, "Number of pseudo-scenes (0: all backgrounds)")
      ->capture_default_str();
  compose_cmd->add_option("--removal-floor", comp.removal_floor)->capture_default_str();
  add_common(compose_cmd, comp.common, true);
  compose_cmd->callback([&] { action = [&] { return cmd_compose(comp, out); }; });

  CalibArgs cal;
  auto* calib_cmd = app.add_subcommand("calib", "Reliability bins and D-ECE");
  calib_cmd->add_option("--dets", cal.dets)->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--gt", cal.gt)->required()->check(CLI::ExistingFile);
  calib_cmd->add_option("--edges", cal.edges, "Bin edges")->delimiter(',');
  calib_cmd->add_option("--match-iou", cal.match_iou)->capture_default_str();
  add_common(calib_cmd, cal.common, true);
  calib_cmd->callback([&] { action = [&] { return cmd_calib(cal, out); }; });

  SimArgs gen, sim;
  gen.world.n_scenes = 40;
  sim.world.n_scenes = 300;
  sim.rounds.selection.budget_boxes = 60;
  auto* sim_cmd = app.add_subcommand("sim", "Synthetic worlds and multi-round experiments");
  sim_cmd->require_subcommand(1);
  auto* gen_cmd = sim_cmd->add_subcommand("gen", "Write a fixture: pool, point clouds, detections");
  add_world_options(gen_cmd, gen);
  gen_cmd->add_option("--labeled", gen.labeled, "Initially labeled scenes")->capture_default_str();
  add_common(gen_cmd, gen.common, true);
  gen_cmd->callback([&] { action = [&] { return cmd_sim_gen(gen, out); }; });

  auto* run_cmd = sim_cmd->add_subcommand("run", "CAL versus random over several rounds");
  add_world_options(run_cmd, sim);
  run_cmd->add_option("--rounds", sim.rounds.n_rounds)->capture_default_str();
  run_cmd->add_option("--budget", sim.rounds.selection.budget_boxes)->capture_default_str();
  run_cmd->add_option("--initial-boxes", sim.rounds.initial_boxes)->capture_default_str();
  run_cmd->add_option("--t-sim", sim.rounds.selection.t_sim)->capture_default_str();
  run_cmd->add_option("--bank-k", sim.rounds.bank_k)->capture_default_str();
  run_cmd->add_option("--pseudo-scenes", sim.rounds.pseudo_scenes)->capture_default_str();
  run_cmd->add_flag("--no-random", sim.no_random, "Skip the random baseline");
  run_cmd->add_flag("--no-cbs", sim.no_cbs);
  run_cmd->add_flag("--no-diversity", sim.no_div);
  add_common(run_cmd, sim.common, true);
  run_cmd->callback([&] { action = [&] { return cmd_sim_run(sim, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInputError;
  }
  try {
    return action ? action() : kExitInputError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInputError;
  }
}

}  // namespace ssal
