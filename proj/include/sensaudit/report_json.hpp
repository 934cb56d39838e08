#pragma once

#include "sensaudit/audit.hpp"

#include <json.hpp>

namespace sensaudit {

nlohmann::json rational_json(const Rational& r);
nlohmann::json analysis_json(const AnalysisReport& report);
nlohmann::json design_json(const DesignAccuracyResult& result, const Rational& p0,
                           const Rational& p1);
nlohmann::json oracle_json(const StratifiedExperiment& exp, const OracleResult& oracle);

std::string witness_string(const OutcomeVector& y);

}  // namespace sensaudit
