#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "model.hpp"
#include "regime.hpp"

namespace sonicflow {

struct Transition {
    double x0 = 0.0;
    double slope = 0.0;
};

struct Solution {
    SolutionKind kind = SolutionKind::Sonic;
    std::vector<double> x;
    std::vector<double> rho;
    std::vector<double> e;
    std::optional<ShockData> shock;
    // index of the last node left of the shock; the next node holds the right state
    std::optional<std::size_t> shockIndex;
    std::optional<Transition> transition;
    std::map<std::string, double> diagnostics;

    std::size_t size() const { return x.size(); }

    FlowRegime regime_at(std::size_t i) const { return regime_of(rho[i]); }
};

} // namespace sonicflow
