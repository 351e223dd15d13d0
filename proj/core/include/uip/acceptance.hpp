#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace uip {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    double seconds = 0.0;
    std::string detail;
};

/// End-to-end validation suite for the engine: eleven numbered criteria, each
/// checking one pillar (closed-form reductions, oracle fields, bound chains,
/// cross-route agreement, estimator accuracy, expansion order, indifference,
/// the electricity example, shape constraints). Every tolerance and grid size
/// is pinned here so a pass is reproducible bit for bit.
///
/// Writes one line per criterion to `log` ("criterion N: PASS - ...") and
/// returns the executed results. `only` = 0 runs all criteria, otherwise just
/// the matching id. A criterion that throws is reported as a failure with the
/// exception text in the detail field.
std::vector<CriterionResult> run_acceptance(std::ostream& log, int only = 0);

} // namespace uip
