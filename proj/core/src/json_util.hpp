#pragma once

#include <json.hpp>
#include <string>
#include <string_view>

#include "avarkit/error.hpp"
#include "avarkit/noise_model.hpp"

namespace avarkit::detail {

using json = nlohmann::json;

inline json parse_json(std::string_view text, const std::string& what) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SpecError(what, std::string("invalid JSON: ") + e.what());
    }
}

inline json params_json(const NoiseParams& p) {
    return json{{"q", p.q},           {"n", p.n},         {"b", p.b},
                {"k", p.k},           {"r", p.r},         {"gm_sigma", p.gm_sigma},
                {"gm_tc", p.gm_tc},   {"bi_period", p.bi_period},
                {"rc_mu", p.rc_mu},   {"rc_sigma", p.rc_sigma}};
}

/// Missing keys default to 0; unknown keys and non-numbers are rejected.
NoiseParams params_from(const json& j, const std::string& path);

}  // namespace avarkit::detail
