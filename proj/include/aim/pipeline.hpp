// End-to-end tracking over recorded audio: identification, per-hop spectral and DoA front end,
// motion accumulator, single-array tracker and, with several synchronised arrays, the
// multilateration branch fused with the inertial track.
#pragma once

#include "aim/config.hpp"
#include "aim/doa.hpp"
#include "aim/dynamics.hpp"
#include "aim/ident.hpp"
#include "aim/io.hpp"
#include "aim/multiarray.hpp"
#include "aim/tracker.hpp"

#include <optional>
#include <string>
#include <vector>

namespace aim {

/// What the tracker may know before it hears anything: the takeoff pose and the beacon schedule.
struct TrackSetup {
  Vec3 start_position = Vec3(0, 0, 2);
  double start_yaw = 0.0;
  BeaconConfig beacon;
  std::uint64_t beacon_seed = 1;  // the beacon waveform is derived from the scenario seed
  double duration = 0.0;          // s; 0 = length of the shortest recording
  bool single_array = false;
};

inline TrackSetup setup_from(const Scenario& sc) {
  TrackSetup s;
  s.start_position = sc.start_position;
  s.start_yaw = sc.start_yaw;
  s.beacon = sc.beacon;
  s.beacon_seed = sc.seed;
  s.duration = sc.duration();
  return s;
}

/// One hop of the front end, kept for the debug dump.
struct HopTrace {
  double t = 0.0;
  int groups = 0;
  double bpf1 = 0.0, bpf2 = 0.0;
  MotionKind kind = MotionKind::Hover;
  double speed = 0.0;  // m/s, dynamics estimate
  double yaw = 0.0;    // rad, rotation committed this hop
  double azimuth = 0.0, elevation = 0.0;
  double var_az = 0.0, var_el = 0.0;
  bool nlos = false;
  Route route = Route::InertialOnly;
};

struct TrackResult {
  std::string profile;
  double confidence = 0.0;
  std::vector<TrackRow> track;
  std::vector<FusedRow> fused;  // empty in single-array mode
  std::vector<HopTrace> trace;
  std::vector<std::string> warnings;
  bool multi = false;
};

namespace detail {

/// Per-array DoA state for one hop.
struct ArrayFront {
  DoAWindow window;
  std::optional<DoAEstimate> latest;
  bool nlos = false;
  std::size_t clear_run = 0;
  Stability stability = Stability::Stable;

  explicit ArrayFront(std::size_t w) : window(w) {}

  void push(const Recording& rec, double t_local, const PipelineConfig& cfg) {
    auto frame = extract_frame(rec, t_local - 0.5 * static_cast<double>(cfg.doa_window) / rec.sample_rate, cfg.doa_window);
    latest.reset();
    try {
      auto est = estimate_doa(frame, rec.geometry);
      window.push(est);
      latest = est;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSignal) throw;
    }
    if (window.full()) {
      // NLoS is held until a whole window of clean bearings has gone by; single quiet hops inside
      // a jittery reflection otherwise slip through as fixes.
      bool now = detect_nlos(window, cfg.theta_nlos);
      clear_run = now ? 0 : clear_run + 1;
      nlos = now || (nlos && clear_run < window.capacity());
      stability = doa_stability(window, cfg.theta_motion);
    } else {
      // Before the window fills the drone is assumed to hold still at takeoff.
      nlos = false;
      stability = Stability::Stable;
    }
  }

  /// Fix for the tracker: smoothed once the window is full, raw before.
  std::optional<DoAEstimate> fix() const {
    if (!latest || latest->high_residual) return std::nullopt;
    return window.full() ? window.latest_smoothed() : *latest;
  }
};

inline std::string route_name(Route r) {
  switch (r) {
    case Route::InertialOnly: return "inertial-only";
    case Route::TwoArray: return "two-array";
    case Route::Multilateration: return "multilateration";
  }
  return "?";
}

}  // namespace detail

/// Identifies the drone from the first seconds of the reference array. Throws Unknown.
inline Identification identify_recording(const Recording& rec, const ProfileDatabase& db, const PipelineConfig& cfg) {
  IdentOptions opt;
  opt.similarity_floor = cfg.similarity_floor;
  opt.energy_floor = cfg.energy_floor;
  double seconds = std::min(2.0, rec.duration());
  return identify(mono_clip(rec, seconds), rec.sample_rate, db, opt);
}

inline std::string debug_csv(const std::vector<HopTrace>& trace) {
  std::string s = "t,groups,bpf1,bpf2,motion,speed,yaw,azimuth,elevation,var_az,var_el,nlos,route\n";
  for (const auto& h : trace)
    s += detail::fmt(h.t) + ',' + std::to_string(h.groups) + ',' + detail::fmt(h.bpf1) + ',' + detail::fmt(h.bpf2) +
         ',' + to_string(h.kind) + ',' + detail::fmt(h.speed) + ',' + detail::fmt(h.yaw) + ',' + detail::fmt(h.azimuth) + ',' + detail::fmt(h.elevation) + ',' +
         detail::fmt(h.var_az) + ',' + detail::fmt(h.var_el) + ',' + (h.nlos ? "1" : "0") + ',' +
         detail::route_name(h.route) + '\n';
  return s;
}

/// Runs the whole pipeline. recs[0] is the reference array: it drives identification, the
/// spectral front end and the inertial track.
inline TrackResult run_pipeline(const std::vector<Recording>& recs, const ProfileDatabase& db,
                                const PipelineConfig& cfg, const TrackSetup& setup) {
  if (recs.empty()) fail(ErrorCode::InvalidInput, "no recordings");
  TrackResult out;
  auto id = identify_recording(recs.front(), db, cfg);
  const DroneProfile profile = *id.profile;
  out.profile = profile.name;
  out.confidence = id.confidence;

  double duration = setup.duration;
  double shortest = recs.front().duration();
  for (const auto& r : recs) shortest = std::min(shortest, r.duration());
  if (duration <= 0.0 || duration > shortest) duration = shortest;

  // Multi-array needs a beacon sync; without one the run falls back to the reference array.
  bool multi = recs.size() > 1 && !setup.single_array;
  std::vector<double> beacon;
  std::optional<SyncState> sync;
  std::vector<double> emissions;
  if (multi) {
    if (!setup.beacon.enabled) {
      out.warnings.push_back("no sync beacon configured; tracking with the reference array only");
      multi = false;
    } else {
      Scenario bsc;
      bsc.seed = setup.beacon_seed;
      bsc.beacon = setup.beacon;
      bsc.sample_rate = recs.front().sample_rate;
      beacon = emit_beacon(bsc);
      for (double e = setup.beacon.first_emission; e + setup.beacon.length < duration; e += setup.beacon.period)
        emissions.push_back(e);
      try {
        if (emissions.empty()) fail(ErrorCode::StaleSync, "recording ends before the first beacon");
        sync = sync_clocks(recs, beacon, setup.beacon, emissions.front());
      } catch (const Error& e) {
        if (e.code() != ErrorCode::StaleSync) throw;
        out.warnings.push_back(std::string("sync beacon missing (") + e.what() + "); tracking with the reference array only");
        multi = false;
      }
    }
  }
  out.multi = multi;
  const std::size_t n_arrays = multi ? recs.size() : 1;

  std::vector<detail::ArrayFront> fronts;
  for (std::size_t i = 0; i < n_arrays; ++i) fronts.emplace_back(cfg.doa_history);

  SpectralConfig scfg;
  scfg.merge_hz = cfg.merge_hz;
  MotionAccumulator acc(profile, cfg.hop, cfg.merge_hz, 2, 3, static_cast<int>(cfg.doa_history));
  double h0 = cfg.initial_height.value_or(setup.start_position.z());
  double yaw0 = cfg.initial_heading.value_or(setup.start_yaw);
  Tracker tracker(cfg, recs.front().geometry.origin, h0, yaw0);

  std::vector<std::optional<Vec3>> zm;
  std::vector<Route> routes;
  std::size_t next_emission = 1;
  const auto hops = static_cast<long>(std::floor(duration / cfg.hop + 1e-9));
  const auto& ref = recs.front();

  for (long k = 1; k <= hops; ++k) {
    const double t = static_cast<double>(k) * cfg.hop;
    HopTrace tr;
    tr.t = t;

    // Refresh the clock offsets once a later beacon has fully arrived.
    if (multi && next_emission < emissions.size() && t > emissions[next_emission] + setup.beacon.length + 0.1) {
      sync = sync_clocks(recs, beacon, setup.beacon, emissions[next_emission], &*sync);
      ++next_emission;
    }

    // Spectral front end on the reference array.
    std::optional<SpectralPeaks> peaks;
    try {
      auto frame = extract_frame(ref, t - 0.5 * static_cast<double>(cfg.spectral_window) / ref.sample_rate,
                                 cfg.spectral_window);
      peaks = estimate_bpf_groups(stft_magnitude(frame), profile, scfg);
      tr.groups = static_cast<int>(peaks->groups.size());
      if (!peaks->groups.empty()) tr.bpf1 = peaks->groups[0].bpf;
      if (peaks->groups.size() > 1) tr.bpf2 = peaks->groups[1].bpf;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoSignal) throw;
    }

    for (std::size_t i = 0; i < n_arrays; ++i)
      fronts[i].push(recs[i], t + (multi ? sync->offsets[i] : 0.0), cfg);
    const auto& f0 = fronts.front();

    auto motion = acc.step(t, peaks, f0.stability);
    auto row = tracker.step(t, motion, f0.fix(), f0.nlos);
    out.track.push_back(row);

    tr.kind = motion.kind;
    tr.speed = motion.speed;
    tr.yaw = motion.yaw_delta;
    if (f0.latest) {
      tr.azimuth = f0.latest->azimuth;
      tr.elevation = f0.latest->elevation;
    }
    tr.var_az = f0.window.azimuth_variance();
    tr.var_el = f0.window.elevation_variance();
    tr.nlos = f0.nlos;

    if (multi) {
      std::vector<ArrayCandidate> cands;
      std::vector<Bearing> all_bearings(n_arrays);
      for (std::size_t i = 0; i < n_arrays; ++i) {
        auto fx = fronts[i].fix();
        cands.push_back({i, recs[i].geometry.origin, fronts[i].window.azimuth_variance(),
                         fronts[i].window.full() && fx.has_value()});
        if (fx) all_bearings[i] = {recs[i].geometry.origin, fx->direction()};
      }
      auto sel = select_arrays(cands, cfg.select_variance);
      std::vector<Bearing> bearings;
      for (auto i : sel.arrays) bearings.push_back(all_bearings[i]);
      Vec3 prior = bearing_fix(bearings).value_or(row.position);
      SolverOptions opt;
      std::optional<Vec3> fix;
      try {
        if (sel.route == Route::Multilateration) {
          std::vector<TdoaMeasurement> tdoas;
          std::vector<ArrayGeometry> geos;
          for (auto i : sel.arrays) geos.push_back(recs[i].geometry);
          const std::size_t p = sel.arrays[0];
          for (std::size_t j = 1; j < sel.arrays.size(); ++j) {
            const std::size_t q = sel.arrays[j];
            double expected = ((prior - recs[q].geometry.origin).norm() - (prior - recs[p].geometry.origin).norm()) /
                              kSpeedOfSound;
            try {
              auto m = inter_array_tdoa(recs[p], recs[q], *sync, p, q, t, expected);
              m.p = 0;
              m.q = static_cast<int>(j);
              tdoas.push_back(m);
            } catch (const Error& e) {
              if (e.code() != ErrorCode::NoMeasurement) throw;
            }
          }
          if (tdoas.size() >= 2) fix = solve_position(tdoas, geos, bearings, opt, {prior});
        } else if (sel.route == Route::TwoArray) {
          std::size_t p = sel.arrays[0], q = sel.arrays[1];
          fix = solve_two_array(recs[p], recs[q], *sync, p, q, t, prior, bearings, opt);
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::SolveFailed && e.code() != ErrorCode::NoMeasurement &&
            e.code() != ErrorCode::NoSignal)
          throw;
        fix.reset();
      }
      zm.push_back(fix);
      routes.push_back(fix ? sel.route : Route::InertialOnly);
      tr.route = routes.back();
    }
    out.trace.push_back(tr);
  }

  if (multi) {
    std::vector<Vec3> za;
    for (const auto& r : out.track) za.push_back(r.position);
    auto fused = fuse_tracks(zm, za, cfg.hop, cfg.fc, cfg.fusion_window);
    for (std::size_t i = 0; i < fused.size(); ++i)
      out.fused.push_back({out.track[i].t, fused[i], routes[i] != Route::InertialOnly});
  }
  return out;
}

}  // namespace aim
