#pragma once

#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "qtag/config.hpp"
#include "qtag/experiment.hpp"

namespace qtag {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportFormat { Table, Records };

inline nlohmann::json report_row_to_json(const ConfigurationResult& row) {
  nlohmann::json j{{"schema_version", kReportSchemaVersion},
                   {"strategy", strategy_name(row.scenario.adversary.strategy)},
                   {"N", row.scenario.protocol.rounds},
                   {"trials", row.trials},
                   {"successes", row.successes},
                   {"p_hat", row.p_hat},
                   {"ci95_lo", row.ci.lo},
                   {"ci95_hi", row.ci.hi},
                   {"mean_abs_arrival_error", row.mean_abs_arrival_error},
                   {"max_abs_arrival_error", row.max_abs_arrival_error},
                   {"wall_seconds", row.wall_seconds},
                   {"seed", row.scenario.experiment.seed}};
  if (row.p_exact) j["p_exact"] = *row.p_exact;
  if (!row.scenario.adversary.displacement.empty())
    j["delta"] = row.scenario.adversary.displacement;
  if (row.qke_sessions) {
    j["qke_sessions"] = row.qke_sessions;
    j["qke_mean_sifted"] = row.mean_qke_sifted;
    j["qke_mean_qber"] = row.mean_qke_qber;
  }
  return j;
}

inline void emit_report(const ExperimentReport& rep, ReportFormat fmt, std::ostream& out) {
  if (fmt == ReportFormat::Records) {
    for (const auto& row : rep.rows) out << report_row_to_json(row).dump() << "\n";
    return;
  }
  out << std::left << std::setw(18) << "strategy" << std::right << std::setw(6) << "N"
      << std::setw(8) << "delta" << std::setw(10) << "trials" << std::setw(10) << "success"
      << std::setw(12) << "p_hat" << std::setw(12) << "p_exact" << std::setw(22) << "ci95"
      << std::setw(12) << "max_err" << std::setw(9) << "secs" << "\n";
  for (const auto& row : rep.rows) {
    double delta = row.scenario.adversary.displacement.empty()
                       ? 0.0
                       : row.scenario.adversary.displacement[0];
    std::ostringstream ci;
    ci << "[" << std::setprecision(4) << row.ci.lo << "," << row.ci.hi << "]";
    out << std::left << std::setw(18) << strategy_name(row.scenario.adversary.strategy)
        << std::right << std::setw(6) << row.scenario.protocol.rounds << std::setw(8)
        << std::setprecision(3) << delta << std::setw(10) << row.trials << std::setw(10)
        << row.successes << std::setw(12) << std::setprecision(6) << row.p_hat << std::setw(12);
    if (row.p_exact) out << std::setprecision(6) << *row.p_exact;
    else out << "-";
    out << std::setw(22) << ci.str() << std::setw(12) << std::setprecision(3)
        << row.max_abs_arrival_error << std::setw(9) << std::setprecision(2) << row.wall_seconds
        << "\n";
  }
}

}  // namespace qtag
