#pragma once

#include <vector>

#include "triosc/model.hpp"

namespace triosc {

struct CrossingEvent {
    double t = 0.0;
    State3 p;
    RegionLabel label = RegionLabel::Crossing;
};

/// Time-stamped states with manifold-contact annotations. Times are strictly
/// monotone (increasing or decreasing); event times lie inside the span.
struct Trajectory {
    std::vector<double> times;
    std::vector<State3> states;
    std::vector<CrossingEvent> events;

    void push(double t, const State3& s) {
        times.push_back(t);
        states.push_back(s);
    }
};

}  // namespace triosc
