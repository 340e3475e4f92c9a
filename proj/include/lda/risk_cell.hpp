#pragma once

#include <optional>
#include <string>

#include "lda/frequency.hpp"
#include "lda/insurance.hpp"
#include "lda/severity.hpp"

namespace lda {

// Business line / event type mapping (regulatory matrix).
struct BaselMapping {
    int business_line = 0; // 1..8
    int event_type = 0;    // 1..7

    BaselMapping(int bl, int et) : business_line(bl), event_type(et) {
        if (bl < 1 || bl > 8 || et < 1 || et > 7)
            throw std::invalid_argument("Basel mapping: business line in 1..8, event type in 1..7");
    }
};

// The unit of aggregation and dependence wiring: an annual count law, a
// severity law, and an optional per-event cover.
struct RiskCell {
    std::string label;
    FrequencyModel frequency;
    SeverityModel severity;
    std::optional<InsurancePolicy> policy;
    std::optional<BaselMapping> mapping;

    RiskCell(std::string lbl, FrequencyModel f, SeverityModel s)
        : label(std::move(lbl)), frequency(std::move(f)), severity(std::move(s)) {}
};

} // namespace lda
