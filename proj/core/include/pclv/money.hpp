#pragma once

#include <cmath>
#include <cstdint>

namespace pclv {

// Monetary values travel through files as integer cents so that round trips
// are bit-exact; model code works in double-precision currency units.
using MoneyCents = std::int64_t;

inline double cents_to_units(MoneyCents cents) {
    return static_cast<double>(cents) / 100.0;
}

inline MoneyCents units_to_cents(double units) {
    return static_cast<MoneyCents>(std::llround(units * 100.0));
}

}  // namespace pclv
