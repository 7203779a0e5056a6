#include "safewatch/sim/device.hpp"

#include "safewatch/gps.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace safewatch::sim {

Device::Device(DeviceConfig config) : config_(config) { fall_.config = config_.fall; }

bool Device::fall_pending() const {
    return fall_.phase == motion::FallPhase::CandidateFall || fall_.phase == motion::FallPhase::AwaitingConfirmation;
}

DeviceOutput Device::step(const Row& row) {
    DeviceOutput out;
    if (const auto* a = std::get_if<AccelRow>(&row)) {
        on_accel(*a, out);
    } else if (const auto* p = std::get_if<PpgRow>(&row)) {
        on_ppg(*p, out);
    } else if (const auto* n = std::get_if<NmeaRow>(&row)) {
        on_nmea(*n, out);
    } else {
        on_button(std::get<ButtonRow>(row), out);
    }
    return out;
}

void Device::apply_fall(const motion::FallStep& step, DeviceOutput& out) {
    fall_ = step.state;
    for (const auto& ev : step.events) {
        out.fall_events.push_back(ev);
        if (ev.kind == motion::FallEventKind::PromptUser) {
            out.local_prompts.emplace_back(kFallPromptText);
        } else if (ev.kind == motion::FallEventKind::FallConfirmed) {
            out.frames.emplace_back(wire::Fall{});
        }
    }
}

void Device::on_accel(const AccelRow& row, DeviceOutput& out) {
    last_g_ = motion::calibrate(row.sample(), config_.calibration);
    apply_fall(motion::fall_step(fall_, last_g_, row.t_ms, false), out);
}

void Device::on_ppg(const PpgRow& row, DeviceOutput& out) {
    const vitals::PpgSample sample{row.t_ms, row.ir, row.red};
    if (vitals::feed_heart_rate(beat_, sample)) ++accepted_beats_;
    window_.push_back(sample);
    if (window_.size() > vitals::kSpo2Window) window_.pop_front();

    if (accepted_beats_ <= beat_.rates.size() || window_.size() < vitals::kSpo2Window) return;
    if (last_vitals_ms_ && row.t_ms - *last_vitals_ms_ < config_.vitals_period_ms) return;
    last_vitals_ms_ = row.t_ms;

    int spo2_tenths = 0;
    try {
        const std::vector<vitals::PpgSample> w(window_.begin(), window_.end());
        spo2_tenths = static_cast<int>(std::lround(vitals::spo2_from_window(w) * 10.0));
    } catch (const vitals::VitalsError&) {
        // Reported as zero; the gateway reads it as low signal.
    }
    out.frames.emplace_back(wire::Vitals{std::clamp(beat_.beat_avg, 0, wire::kMaxBpm),
                                         std::clamp(spo2_tenths, 0, wire::kMaxSpo2Tenths)});
}

void Device::on_nmea(const NmeaRow& row, DeviceOutput& out) {
    try {
        const auto fix = gps::to_fix(gps::parse_sentence(row.line), row.t_ms);
        if (fix.valid()) {
            out.frames.emplace_back(wire::Gps{gps::to_e5(fix.position->lat), gps::to_e5(fix.position->lon)});
        }
    } catch (const gps::NmeaError&) {
        // A garbled sentence is skipped, as the module sends the next one in a second.
    }
}

void Device::on_button(const ButtonRow& row, DeviceOutput& out) {
    if (row.button == 'A') {
        if (fall_pending()) {
            apply_fall(motion::fall_step(fall_, last_g_, std::max(row.t_ms, fall_.last_update_ms), true), out);
        } else {
            out.frames.emplace_back(wire::Ok{});
        }
        return;
    }
    const auto step = escalation::button_step(buttons_, row.t_ms, config_.double_press_window_ms);
    buttons_ = step.state;
    if (step.panic) out.frames.emplace_back(wire::Sos{});
}

}  // namespace safewatch::sim
