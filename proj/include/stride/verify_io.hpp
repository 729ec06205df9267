#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "stride/verify.hpp"

namespace stride {

/// Parse failure with the 1-based line it was found on (0 for whole-file
/// problems such as a wrong line count).
class SubmissionError : public std::runtime_error {
 public:
  SubmissionError(std::string message, std::size_t line)
      : std::runtime_error(std::move(message)), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Strict submission reader: exactly `expected_count` newline-separated
/// scores in [0, 1] plus a one-value threshold file. A trailing final
/// newline is tolerated; anything else is rejected with its location.
Submission parse_submission(const std::string& scores_text,
                            const std::string& threshold_text,
                            std::size_t expected_count = 10000);

/// Ground-truth row for one probe, in submission score order.
struct ManifestEntry {
  std::string probe_id;
  std::string claimed_id;
  std::string true_id;
  bool genuine = false;
  ConditionTag condition;
};

/// Header `probe_id,claimed_id,true_id,label,footwear,speed`; label must be
/// consistent with the id columns.
std::vector<ManifestEntry> parse_manifest(const std::string& text);
std::string manifest_to_csv(const std::vector<ManifestEntry>& entries);

/// Pairs manifest rows with submission scores by position.
ScoreSet build_score_set(const std::vector<ManifestEntry>& manifest,
                         const Submission& submission);

/// Header `id,side,footwear,speed,v0,...`; dimension fixed by the header.
std::vector<Embedding> parse_embeddings(const std::string& text);
std::string embeddings_to_csv(const std::vector<Embedding>& embeddings);

/// Misclassified-probe listing: `probe_id,false_match` or
/// `probe_id,false_non_match`, one per line.
ModelDecisions parse_decisions(const std::string& model_name, const std::string& text);

std::string det_to_csv(const std::vector<DetPoint>& points);

nlohmann::json metrics_to_json(const MetricsReport& m);
nlohmann::json stratified_to_json(const StratifiedReport& r);
nlohmann::json overlap_to_json(const OverlapReport& r);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace stride
