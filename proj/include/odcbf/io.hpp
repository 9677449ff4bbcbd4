#pragma once

// Trajectory and report serialisation. Requires nlohmann/json on the include
// path as "json.hpp".

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "odcbf/sim.hpp"
#include "odcbf/verify.hpp"

namespace odcbf::io {

using nlohmann::json;

// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline std::string csv_header(Index n, Index m, Index p) {
  std::string out = "t";
  for (Index i = 1; i <= n; ++i) out += ",x_" + std::to_string(i);
  for (Index i = 1; i <= m; ++i) out += ",u_" + std::to_string(i);
  for (Index i = 1; i <= p; ++i) out += ",d_" + std::to_string(i);
  out += ",h,h_layer,theta";
  return out;
}

inline std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream os;
  if (tr.size() == 0) return csv_header(0, 0, 0) + "\n";
  os << csv_header(tr.states[0].size(), tr.inputs[0].size(), tr.disturbances[0].size()) << '\n';
  for (std::size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.times[k]);
    for (double v : tr.states[k]) os << ',' << format_double(v);
    for (double v : tr.inputs[k]) os << ',' << format_double(v);
    for (double v : tr.disturbances[k]) os << ',' << format_double(v);
    os << ',' << format_double(tr.h_values[k]) << ',' << format_double(tr.layer_h_values[k]) << ','
       << format_double(tr.omegas[k]) << '\n';
  }
  return os.str();
}

inline json to_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

// Non-finite values are emitted as null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const SafetyMetrics& m) {
  return {{"min_h", number(m.min_h)},
          {"min_layer_h", number(m.min_layer_h)},
          {"max_violation", number(m.max_violation)},
          {"gamma", number(m.gamma)},
          {"issf_bound_satisfied", m.issf_bound_satisfied},
          {"theta_floor_ok", m.theta_floor_ok}};
}

inline json to_json(const Trajectory& tr) {
  json states = json::array(), inputs = json::array(), dist = json::array(), omegas = json::array();
  for (std::size_t k = 0; k < tr.size(); ++k) {
    states.push_back(to_json(tr.states[k]));
    inputs.push_back(to_json(tr.inputs[k]));
    dist.push_back(to_json(tr.disturbances[k]));
    omegas.push_back(number(tr.omegas[k]));
  }
  return {{"t", tr.times},         {"x", states},          {"u", inputs},   {"d", dist},
          {"h", tr.h_values},      {"h_layer", tr.layer_h_values},          {"theta", omegas}};
}

inline json to_json(const RolloutResult& r) {
  json j = {{"metrics", to_json(r.metrics)},
            {"truncated", r.truncated},
            {"aborted", r.aborted},
            {"diagnostic", r.diagnostic}};
  j["abort_step"] = r.abort_step ? json(*r.abort_step) : json(nullptr);
  return j;
}

inline json to_json(const SampleReport& rep) {
  json ce = json::array();
  for (const auto& c : rep.violations) ce.push_back({{"state", to_json(c.state)}, {"margin", number(c.margin)}});
  return {{"check", rep.check},
          {"verdict", to_string(rep.verdict)},
          {"evidence", "numerical evidence"},
          {"samples_checked", rep.samples_checked},
          {"hits", rep.hits},
          {"min_margin", number(rep.min_margin)},
          {"counterexamples", ce}};
}

// Write via a temporary sibling and rename, so readers never see partial files.
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace odcbf::io
