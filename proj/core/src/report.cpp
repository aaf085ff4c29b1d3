#include "nnrep/report.hpp"

#include <json.hpp>

namespace nnrep {

namespace {

using nlohmann::ordered_json;

ordered_json metrics_obj(const Metrics& m) {
  ordered_json j;
  j["mae"] = m.mae;
  j["re_percent"] = m.re;
  j["ib_percent"] = m.ib;
  j["violating_before"] = m.violating_before;
  j["repaired"] = m.repaired;
  j["test_satisfying_before"] = m.test_satisfying_before;
  j["test_broken"] = m.test_broken;
  ordered_json acc = ordered_json::array();
  for (const auto& [eps, v] : m.acc) acc.push_back({{"eps", eps}, {"acc_percent", v}});
  j["acc"] = acc;
  return j;
}

}  // namespace

std::string repair_report_json(const RepairReport& r, bool include_timings) {
  ordered_json j;
  j["status"] = to_string(r.status);
  j["feasible"] = r.feasible();
  j["layer"] = r.layer;
  j["objective"] = r.objective;
  j["delta"] = r.delta;
  j["nodes"] = r.nodes;
  j["metrics"] = metrics_obj(r.metrics);
  if (!r.loop.empty()) {
    ordered_json loop = ordered_json::array();
    for (const auto& it : r.loop) {
      loop.push_back({{"iter", it.iter}, {"cex", it.counterexamples}, {"re", it.re}, {"status", it.status}});
    }
    j["loop"] = loop;
    j["verified_safe"] = r.verified_safe;
    j["unknown"] = r.unknown;
  }
  if (include_timings) {
    ordered_json t;
    for (const auto& [k, v] : r.timings) t[k] = v;
    j["timings_s"] = t;
  }
  j["diagnostic"] = r.diagnostic;
  return j.dump(2) + "\n";
}

std::string metrics_json(const Metrics& m) { return metrics_obj(m).dump(2) + "\n"; }

std::string verdict_json(const Verdict& v) {
  ordered_json j;
  j["verdict"] = to_string(v.kind);
  j["counterexamples"] = v.counterexamples.size();
  j["nodes"] = v.nodes;
  j["diagnostic"] = v.diagnostic;
  return j.dump(2) + "\n";
}

}  // namespace nnrep
