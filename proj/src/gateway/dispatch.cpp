#include "safewatch/gateway/dispatch.hpp"

#include "safewatch/http_client.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <fstream>

namespace safewatch::gateway {

Json HttpEmailSender::request_body(const EmailConfig& config, const OutboundMessage& msg) {
    const auto& alert = *msg.alert;
    return {{"service_id", config.service_id},
            {"template_id", config.template_id},
            {"user_id", config.user_id},
            {"template_params",
             {{"name", msg.wearer},
              {"cause", escalation::cause_text(alert.cause)},
              {"time", escalation::format_time(alert.opened_at_ms)},
              {"location", escalation::location_text(alert)},
              {"to_email", msg.planned.destination},
              {"message", msg.planned.body}}}};
}

SendResult HttpEmailSender::send(const OutboundMessage& msg) {
    const auto res = net::http_post_json(config_.url, request_body(config_, msg).dump(),
                                         std::chrono::milliseconds(config_.timeout_ms));
    if (res.ok()) return {true, fmt::format("http {}", res.status)};
    return {false, res.status ? fmt::format("http {}", res.status) : res.error};
}

SendResult FileSmsSender::send(const OutboundMessage& msg) {
    std::lock_guard lock(mu_);
    std::ofstream out(path_, std::ios::app);
    if (!out) return {false, fmt::format("cannot open {}", path_)};
    out << msg.planned.destination << '\t' << msg.planned.body << '\n';
    out.flush();
    if (!out) return {false, fmt::format("write to {} failed", path_)};
    return {true, "outbox"};
}

SendResult WebhookSmsSender::send(const OutboundMessage& msg) {
    const Json body{{"to", msg.planned.destination}, {"body", msg.planned.body}};
    const auto res = net::http_post_json(url_, body.dump(), std::chrono::milliseconds(timeout_ms_));
    if (res.ok()) return {true, fmt::format("http {}", res.status)};
    return {false, res.status ? fmt::format("http {}", res.status) : res.error};
}

escalation::DeliveryOutcome deliver(MessageSender& sender, const OutboundMessage& msg, Clock& clock,
                                    std::int64_t retry_delay_ms) {
    escalation::DeliveryOutcome out{msg.planned.contact.name, msg.planned.channel, msg.planned.destination, {}};
    for (int attempt = 0; attempt < 2; ++attempt) {
        if (attempt > 0) clock.sleep_for(retry_delay_ms);
        SendResult r;
        try {
            r = sender.send(msg);
        } catch (const std::exception& e) {
            r = {false, e.what()};
        }
        out.attempts.push_back({clock.now_ms(), r.ok, r.detail});
        if (r.ok) break;
    }
    return out;
}

DispatchOutput run_dispatch(const escalation::AlertCase& alert, const std::vector<escalation::Contact>& contacts,
                            const std::string& wearer, gps::Geocoder* geocoder, const Channels& channels,
                            Clock& clock, std::int64_t retry_delay_ms) {
    DispatchOutput out;
    auto located = alert;
    if (geocoder && alert.fix && alert.fix->valid()) {
        try {
            located.address = geocoder->reverse_geocode(*alert.fix).display;
        } catch (const std::exception& e) {
            spdlog::warn("case {}: geocoding failed, sending coordinates ({})", alert.id, e.what());
        }
    }
    out.address = located.address;

    for (const auto& planned : escalation::plan_dispatch(located, contacts, wearer)) {
        const auto& sender = planned.channel == escalation::Channel::Email ? channels.email : channels.sms;
        if (!sender) {
            out.outcomes.push_back({planned.contact.name, planned.channel, planned.destination,
                                    {{clock.now_ms(), false, "channel disabled"}}});
            continue;
        }
        out.outcomes.push_back(deliver(*sender, {planned, &located, wearer}, clock, retry_delay_ms));
    }
    return out;
}

}  // namespace safewatch::gateway
