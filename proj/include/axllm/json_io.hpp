// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include <json.hpp>

#include "axllm/accelerator.hpp"
#include "axllm/workload.hpp"

namespace axllm {

inline constexpr const char* kWorkloadSchema = "axllm-workload/1";
inline constexpr const char* kConfigSchema = "axllm-config/1";
inline constexpr const char* kReportSchema = "axllm-report/1";

using Json = nlohmann::ordered_json;

// Readers reject unknown keys and wrong types, naming the offending path.
// Missing keys keep their defaults, except where a field has none (shapes).

Json to_json(const DistributionSpec& d);
DistributionSpec distribution_from_json(const Json& j, const std::string& where = "source");

Json to_json(const WorkloadSpec& w);
WorkloadSpec workload_from_json(const Json& j);

Json to_json(const AcceleratorConfig& c);
AcceleratorConfig config_from_json(const Json& j);

Json to_json(const ReuseStats& s);
Json to_json(const EventCounters& e);
Json to_json(const RunReport& r);
Json to_json(const Comparison& c);

/// Parses text, throwing InvalidArgument with the parser's message on failure.
Json parse_json(const std::string& text, const std::string& what);
/// Two-space indented text ending in a newline.
std::string dump(const Json& j);

}  // namespace axllm
