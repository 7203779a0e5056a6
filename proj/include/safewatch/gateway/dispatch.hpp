#pragma once

#include "safewatch/escalation.hpp"
#include "safewatch/gateway/clock.hpp"
#include "safewatch/gateway/config.hpp"
#include "safewatch/geocode.hpp"

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace safewatch::gateway {

/// What one delivery attempt reports back.
struct SendResult {
    bool ok = false;
    std::string detail;
};

/// Everything a channel may need to render a message.
struct OutboundMessage {
    escalation::PlannedMessage planned;
    const escalation::AlertCase* alert = nullptr;
    std::string wearer;
};

class MessageSender {
public:
    virtual ~MessageSender() = default;
    virtual SendResult send(const OutboundMessage& msg) = 0;
};

/// Template-style email endpoint: POST JSON with service, template and user
/// ids plus the template parameters.
class HttpEmailSender : public MessageSender {
public:
    explicit HttpEmailSender(EmailConfig config) : config_(std::move(config)) {}
    SendResult send(const OutboundMessage& msg) override;

    static Json request_body(const EmailConfig& config, const OutboundMessage& msg);

private:
    EmailConfig config_;
};

/// Appends "<destination>\t<body>" per message to a text file.
class FileSmsSender : public MessageSender {
public:
    explicit FileSmsSender(std::string path) : path_(std::move(path)) {}
    SendResult send(const OutboundMessage& msg) override;

private:
    std::string path_;
    std::mutex mu_;
};

/// POST {"to": ..., "body": ...} to a webhook.
class WebhookSmsSender : public MessageSender {
public:
    WebhookSmsSender(std::string url, std::int64_t timeout_ms) : url_(std::move(url)), timeout_ms_(timeout_ms) {}
    SendResult send(const OutboundMessage& msg) override;

private:
    std::string url_;
    std::int64_t timeout_ms_;
};

/// Sends one message with a single retry after `retry_delay_ms` of clock time.
escalation::DeliveryOutcome deliver(MessageSender& sender, const OutboundMessage& msg, Clock& clock,
                                    std::int64_t retry_delay_ms);

struct Channels {
    std::shared_ptr<MessageSender> email;  // null: email disabled
    std::shared_ptr<MessageSender> sms;    // null: SMS disabled
};

/// Looks up an address (failures degrade to none), plans and sends. Returns
/// the address used and one outcome per planned message.
struct DispatchOutput {
    std::optional<std::string> address;
    std::vector<escalation::DeliveryOutcome> outcomes;
};

DispatchOutput run_dispatch(const escalation::AlertCase& alert, const std::vector<escalation::Contact>& contacts,
                            const std::string& wearer, gps::Geocoder* geocoder, const Channels& channels,
                            Clock& clock, std::int64_t retry_delay_ms);

}  // namespace safewatch::gateway
