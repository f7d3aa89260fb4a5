// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace lioncub {

struct SelftestOptions {
  std::vector<int> worlds = {2, 3, 4, 8};
  // Flip a payload bit between pack and unpack (negative control).
  bool inject_pack_fault = false;
};

struct SelftestResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

std::vector<SelftestResult> run_selftest(const SelftestOptions& opts);

}  // namespace lioncub
