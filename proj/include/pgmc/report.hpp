#pragma once

// Experiment report: one metrics row per update plus the final summaries.
// CSV/JSON writers format numbers explicitly so identical runs produce
// byte-identical files.

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pgmc/errors.hpp"
#include "pgmc/eval.hpp"

namespace pgmc {

struct ReportRow {
  int update = 0;  // 0 is the initial state
  double gmm_accuracy = 0.0;
  double lda_accuracy = 0.0;
  double mean_elbo = 0.0;
};

struct StereotypeEntry {
  int class_index = 0;
  int majority_digit = -1;
  std::string word;       // stereotype of the class
  std::string canonical;  // canonical pronunciation of the majority digit
  std::size_t member_count = 0;
};

struct ExperimentReport {
  std::vector<ReportRow> rows;
  std::vector<StereotypeEntry> stereotypes;
  Pca2Result pca;
  double final_gmm_accuracy = 0.0;
  double final_lda_accuracy = 0.0;
  long combine_degeneracies = 0;
  long resample_degeneracies = 0;
  long covariance_regularizations = 0;
  nlohmann::json config_echo;
  bool failed = false;
  std::string failure;
};

namespace detail {

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace detail

inline void write_report_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write report csv " + path);
  out << "update,gmm_accuracy,lda_accuracy,mean_elbo\n";
  for (const auto& row : report.rows) {
    out << row.update << ',' << detail::format_double(row.gmm_accuracy) << ','
        << detail::format_double(row.lda_accuracy) << ','
        << detail::format_double(row.mean_elbo) << '\n';
  }
  if (report.failed) out << "# run failed: " << report.failure << '\n';
}

inline void write_stereotypes_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write stereotype csv " + path);
  out << "class,majority_digit,stereotype,canonical,members\n";
  for (const auto& s : report.stereotypes) {
    out << s.class_index << ',' << s.majority_digit << ',' << s.word << ',' << s.canonical << ','
        << s.member_count << '\n';
  }
}

inline void write_pca_csv(const ExperimentReport& report, const std::string& path,
                          const std::vector<int>& labels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write pca csv " + path);
  out << "pc1,pc2,label\n";
  for (std::size_t i = 0; i < report.pca.coords.size(); ++i) {
    out << detail::format_double(report.pca.coords[i][0]) << ','
        << detail::format_double(report.pca.coords[i][1]) << ','
        << (i < labels.size() ? labels[i] : -1) << '\n';
  }
}

inline nlohmann::json summary_json(const ExperimentReport& report) {
  nlohmann::json stereotypes = nlohmann::json::array();
  for (const auto& s : report.stereotypes) {
    stereotypes.push_back({{"class", s.class_index},
                           {"majority_digit", s.majority_digit},
                           {"stereotype", s.word},
                           {"canonical", s.canonical},
                           {"members", s.member_count}});
  }
  return nlohmann::json{
      {"final", {{"gmm_accuracy", report.final_gmm_accuracy},
                 {"lda_accuracy", report.final_lda_accuracy}}},
      {"pca_variance_proportions",
       {report.pca.variance_proportions[0], report.pca.variance_proportions[1]}},
      {"stereotypes", stereotypes},
      {"degeneracies", {{"combine", report.combine_degeneracies},
                        {"resample", report.resample_degeneracies},
                        {"covariance_regularizations", report.covariance_regularizations}}},
      {"updates", report.rows.empty() ? 0 : report.rows.back().update},
      {"failed", report.failed},
      {"failure", report.failure},
      {"config", report.config_echo},
  };
}

inline void write_summary_json(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write summary json " + path);
  out << summary_json(report).dump(2) << '\n';
}

}  // namespace pgmc
