#pragma once

#include "safewatch/escalation.hpp"
#include "safewatch/gps.hpp"
#include "safewatch/vitals.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace safewatch::gateway {

using Json = nlohmann::json;

inline constexpr const char* kDefaultDevice = "watch";

/// Everything registered for one wearer: who they are, their ranges and who
/// to call.
struct Profile {
    std::string device_id = kDefaultDevice;
    std::string wearer_name = "wearer";
    vitals::PregnancyProfile pregnancy;
    std::vector<escalation::Contact> contacts;
};

Json to_json(const Profile& p);
Json to_json(const vitals::RangeBand& b);
Json to_json(const gps::GeoFix& fix);
Json to_json(const escalation::DeliveryOutcome& o);
Json to_json(const escalation::AlertCase& c);

/// Parses and validates a profile. Bands default to `default_bands` when the
/// body has none. Throws escalation::ValidationError naming the bad field.
Profile profile_from_json(const Json& j, const std::vector<vitals::RangeBand>& default_bands);

std::vector<vitals::RangeBand> bands_from_json(const Json& j);
escalation::DeliveryOutcome outcome_from_json(const Json& j);
std::optional<vitals::Reason> reason_from(std::string_view s);

}  // namespace safewatch::gateway
