// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace tad {

/// `args` excludes the program name. Returns 0 on success or a passing
/// verification, 2 when verification fails and 1 on input errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tad
