#pragma once

#include "itm/cluster.hpp"
#include "itm/descriptors.hpp"
#include "itm/privnet.hpp"
#include "itm/topics.hpp"

#include <json.hpp>

#include <filesystem>

// JSON forms of the pipeline artifacts (clusters.json, topics.json,
// descriptors.json, model.json, metrics.json).
namespace itm {

using Json = nlohmann::ordered_json;

Json to_json(const Cluster& c);
Cluster cluster_from_json(const Json& j);

Json to_json(const Topic& t);
Topic topic_from_json(const Json& j);

Json to_json(const Descriptor& d);
Descriptor descriptor_from_json(const Json& j);

Json to_json(const Metrics& m, const std::vector<std::string>& class_names);

Json to_json(const LinearModel& m);
LinearModel model_from_json(const Json& j);

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& j);
void write_text(const std::filesystem::path& path, const std::string& text);

/// Shortest round-trip text of a double, identical to how it appears in JSON output.
std::string format_number(double v);

}  // namespace itm
