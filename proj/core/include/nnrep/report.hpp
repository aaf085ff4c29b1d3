#pragma once

#include <string>

#include "nnrep/repair.hpp"
#include "nnrep/verifier.hpp"

namespace nnrep {

// JSON documents written by the command-line tool. Wall-clock timings make
// output differ between runs, so they are only included on request.
std::string repair_report_json(const RepairReport& report, bool include_timings = false);
std::string metrics_json(const Metrics& m);
std::string verdict_json(const Verdict& v);

}  // namespace nnrep
