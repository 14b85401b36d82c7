// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>

namespace spn::testdata {

struct PublishedRow {
  const char* method;
  double accuracy;
  double earliness;
  double harmonic_mean;
};

// Mean columns of the published 12-lead ECG comparison table.
inline constexpr std::array<PublishedRow, 6> kPublishedRows{{
    {"SR2-CF2", 0.167, 0.228, 0.274},
    {"EARLIEST", 0.283, 0.001, 0.441},
    {"TEASER", 0.456, 0.549, 0.453},
    {"MDDNN", 0.585, 0.455, 0.564},
    {"ETEeTSC", 0.735, 0.416, 0.649},
    {"SPN", 0.796, 0.387, 0.694},
}};

}  // namespace spn::testdata
