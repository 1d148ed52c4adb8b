#pragma once

#include <cmath>
#include <vector>

#include "percamp/io.hpp"

inline const percamp::Json& oracles() {
    static const percamp::Json j = percamp::read_json(PERCAMP_ORACLES);
    return j;
}

inline double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}
