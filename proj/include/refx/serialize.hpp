#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "refx/contrast.hpp"
#include "refx/explain.hpp"

namespace refx {

using Json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "1";

// Artifact documents share one envelope:
//   {schema_version, method, reference: {label, n_rows, spec}, seed, payload}
// Keys appear in a fixed order and doubles are written in shortest
// round-trip form, so equal artifacts always serialize to equal bytes.
Json to_json(const ReferenceInfo& ref);
Json to_json(const AttributionSet& a);
Json to_json(const Profile& p);
Json to_json(const std::vector<Profile>& ice_curves);
Json to_json(const ImportanceTable& t);
Json to_json(const ContrastReport& r);
Json to_json(const DriftReport& r);

// Pretty-printed document with a trailing newline.
template <typename Artifact>
std::string emit_json(const Artifact& artifact) {
  return to_json(artifact).dump(2) + "\n";
}

ReferenceInfo reference_from_json(const Json& j);
AttributionSet attribution_from_json(const Json& doc);
Profile profile_from_json(const Json& doc);
std::vector<Profile> ice_from_json(const Json& doc);
ImportanceTable importance_from_json(const Json& doc);
ContrastReport contrast_from_json(const Json& doc);
DriftReport drift_from_json(const Json& doc);

}  // namespace refx
