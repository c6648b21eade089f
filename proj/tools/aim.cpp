// Command-line entry points: simulate, track, eval, run (all three) and build-db.
// Exit codes: 0 ok, 2 input error, 3 identification failure, 1 anything else.

#include "aim/eval.hpp"
#include "aim/pipeline.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <chrono>
#include <optional>

#ifndef AIM_DATA_DIR
#define AIM_DATA_DIR "data"
#endif

namespace {

using namespace aim;

struct Options {
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string config;
  bool single_array = false;
  bool dump_debug = false;
  std::string audio;
  std::string db;
  std::string track;
  std::string truth;
  double max_gap = -1.0;
  int db_seeds = 2;
  std::uint64_t db_corpus_seed = 1;
};

Scenario scenario_with_seed(const Options& o) {
  auto sc = load_scenario(o.scenario);
  if (o.seed) sc.seed = *o.seed;
  return sc;
}

void simulate(const Options& o) {
  auto sc = scenario_with_seed(o);
  fs::path out(o.out);
  auto truth = plan_flight(sc);
  auto recs = synthesize(truth, sc);
  for (const auto& r : recs) write_wav(out / (r.geometry.id + ".wav"), r);
  write_atomic(out / "truth.csv", truth_csv(truth, sc));
  write_atomic(out / "scenario.json", scenario_to_json(sc).dump(2) + "\n");
  spdlog::info("simulated {} ({} array(s), {:.1f} s) into {}", sc.name, recs.size(), sc.duration(), out.string());
}

ProfileDatabase database(const Options& o) {
  fs::path p = o.db.empty() ? fs::path(AIM_DATA_DIR) / "profiles.json" : fs::path(o.db);
  if (fs::exists(p)) return load_database(p.string());
  if (!o.db.empty()) fail(ErrorCode::InvalidInput, "profile database not found: " + p.string());
  spdlog::warn("{} not found; rebuilding the profile database from the simulator corpus", p.string());
  return build_database(default_profiles());
}

/// Returns the exit code: 2 when an input WAV was truncated (the partial track is still written).
int track(const Options& o) {
  auto sc = scenario_with_seed(o);
  auto cfg = load_config(o.config);
  cfg.hop = sc.hop;
  fs::path audio(o.audio.empty() ? o.out : o.audio);
  fs::path out(o.out);
  std::vector<Recording> recs;
  bool truncated = false;
  for (const auto& a : sc.arrays) {
    bool cut = false;
    recs.push_back(read_wav(audio / (a.id + ".wav"), a, &cut));
    if (cut) spdlog::error("{}: WAV data ends early; tracking up to the truncation", (audio / (a.id + ".wav")).string());
    truncated = truncated || cut;
  }
  auto setup = setup_from(sc);
  setup.single_array = o.single_array;
  if (truncated) setup.duration = 0.0;
  auto db = database(o);

  auto t0 = std::chrono::steady_clock::now();
  auto res = run_pipeline(recs, db, cfg, setup);
  double runtime = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  for (const auto& w : res.warnings) spdlog::warn("{}", w);

  write_atomic(out / "track.csv", track_csv(res.track));
  if (res.multi) write_atomic(out / "fused.csv", fused_csv(res.fused));
  if (o.dump_debug) write_atomic(out / "debug.csv", debug_csv(res.trace));
  nlohmann::json meta = {{"profile", res.profile},     {"confidence", res.confidence}, {"runtime_s", runtime},
                         {"multi_array", res.multi},   {"rows", res.track.size()},     {"warnings", res.warnings},
                         {"truncated", truncated},     {"config", cfg}};
  write_atomic(out / "track_meta.json", meta.dump(2) + "\n");
  spdlog::info("identified {} ({:.3f}); {} rows in {:.2f} s", res.profile, res.confidence, res.track.size(), runtime);
  if (truncated) {
    spdlog::error("input audio was truncated");
    return 2;
  }
  return 0;
}

void evaluate_cmd(const Options& o, double hop) {
  fs::path track_path(o.track);
  auto rep = evaluate(read_positions(track_path), read_positions(o.truth), o.max_gap >= 0 ? o.max_gap : 0.5 * hop);
  auto meta = track_path.parent_path() / "track_meta.json";
  if (fs::exists(meta)) rep.runtime = nlohmann::json::parse(read_file(meta)).value("runtime_s", 0.0);
  fs::path out(o.out);
  write_atomic(out / "report.json", report_to_json(rep).dump(2) + "\n");
  write_atomic(out / "cdf.csv", cdf_csv(rep));
  spdlog::info("mean error {:.3f} m over {} steps", rep.mean, rep.steps.size());
}

int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidInput:
    case ErrorCode::StaleSync: return 2;
    case ErrorCode::Unknown: return 3;
    default: return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acoustic drone localisation: simulate, track and score"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* c, bool need_scenario) {
    auto* s = c->add_option("--scenario", o.scenario, "Scenario JSON")->check(CLI::ExistingFile);
    if (need_scenario) s->required();
    c->add_option("--out", o.out, "Output directory")->required();
    c->add_option("--seed", o.seed, "Override the scenario seed");
  };
  auto add_track = [&](CLI::App* c) {
    c->add_option("--config", o.config, "Pipeline config JSON (falls back to $AIM_CONFIG)");
    c->add_flag("--single-array", o.single_array, "Track with the reference array only");
    c->add_flag("--dump-debug", o.dump_debug, "Write per-hop spectral/DoA trace to debug.csv");
    c->add_option("--db", o.db, "Profile database JSON (default: bundled data/profiles.json)");
  };

  auto* sim = app.add_subcommand("simulate", "Render per-array WAVs and the truth CSV");
  add_common(sim, true);

  auto* trk = app.add_subcommand("track", "Run the pipeline over a WAV set");
  add_common(trk, true);
  add_track(trk);
  trk->add_option("--audio", o.audio, "Directory holding <array id>.wav (default: --out)");

  auto* ev = app.add_subcommand("eval", "Score a track CSV against a truth CSV");
  ev->add_option("--track", o.track, "Track or fused CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", o.truth, "Truth CSV")->required()->check(CLI::ExistingFile);
  ev->add_option("--out", o.out, "Output directory")->required();
  ev->add_option("--max-gap", o.max_gap, "Largest allowed timestamp mismatch in s (default: hop / 2)");
  ev->add_option("--scenario", o.scenario, "Scenario JSON, for its hop")->check(CLI::ExistingFile);

  auto* run = app.add_subcommand("run", "simulate + track + eval into one directory");
  add_common(run, true);
  add_track(run);

  auto* bdb = app.add_subcommand("build-db", "Build the profile database from the simulator corpus");
  bdb->add_option("--out", o.out, "Output JSON path")->required();
  bdb->add_option("--corpus-seed", o.db_corpus_seed, "First corpus seed");
  bdb->add_option("--seeds", o.db_seeds, "Seeds per profile and motion")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*sim) simulate(o);
    if (*trk) return track(o);
    if (*ev) {
      double hop = o.scenario.empty() ? 0.1 : load_scenario(o.scenario).hop;
      evaluate_cmd(o, hop);
    }
    if (*run) {
      auto sc = scenario_with_seed(o);
      simulate(o);
      int rc = track(o);
      if (rc != 0) return rc;
      fs::path out(o.out);
      Options e = o;
      e.track = ((out / "fused.csv").string());
      if (!fs::exists(e.track)) e.track = (out / "track.csv").string();
      e.truth = (out / "truth.csv").string();
      evaluate_cmd(e, sc.hop);
    }
    if (*bdb) {
      auto db = build_database(default_profiles(), o.db_corpus_seed, o.db_seeds);
      write_atomic(o.out, database_to_json(db).dump(2) + "\n");
      spdlog::info("wrote {} profiles to {}", db.entries.size(), o.out);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
