// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>

namespace axllm {

/// The axllm command line. Returns the process exit status: 0 on success,
/// 1 on a usage or validation error, 2 if a simulator invariant broke.
/// Files named by --out are written whole or not at all.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace axllm
