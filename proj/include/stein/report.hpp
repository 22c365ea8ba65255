#pragma once

#include "stein/bayes.hpp"
#include "stein/bounds.hpp"
#include "stein/verify.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace stein {

inline constexpr const char* kReportSchemaVersion = "1.0.0";

/// Non-finite doubles become null.
nlohmann::json json_number(double v);

nlohmann::json to_json(const HypothesisCheck& h);
nlohmann::json to_json(const McVariance& m);
nlohmann::json to_json(const BoundReport& r);
nlohmann::json to_json(const Assertion& a);
/// Runtime is left out so that identical runs serialize identically.
nlohmann::json to_json(const ScenarioResult& s);
nlohmann::json to_json(const PosteriorModel& m);

/// {"schema_version", "tool", "command", "seed", ...} with `body` merged in.
nlohmann::json report_envelope(const std::string& command, std::uint64_t seed, const nlohmann::json& body);

/// Columns: method, lower, upper, mc_var, ci, hypotheses, remainder, seed.
std::string csv_header();
std::string csv_row(const BoundReport& r);
std::string to_csv(const std::vector<BoundReport>& reports);

/// One-paragraph plain-text summary for terminals.
std::string text_summary(const BoundReport& r);

}  // namespace stein
