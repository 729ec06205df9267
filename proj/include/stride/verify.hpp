#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "stride/conditions.hpp"

namespace stride {

enum class Side { left, right };

std::string to_string(Side s);
Side side_from_string(const std::string& s);

/// One footstep embedding vector with its capture metadata. Vector
/// dimensions must agree across everything compared in one evaluation.
struct Embedding {
  std::string id;
  Side side = Side::left;
  ConditionTag condition;
  std::vector<double> vector;
};

/// Enrollment references: exactly five left and five right embeddings per
/// identity.
class ReferenceGallery {
 public:
  static constexpr std::size_t kPerSide = 5;

  /// Groups embeddings by identity and side; throws unless every identity
  /// ends up with exactly five per side and dimensions are uniform.
  explicit ReferenceGallery(const std::vector<Embedding>& refs);

  const std::vector<Embedding>& references(const std::string& id, Side side) const;
  bool enrolled(const std::string& id) const;
  std::vector<std::string> identities() const;
  std::size_t dimension() const { return dimension_; }

 private:
  std::map<std::string, std::vector<Embedding>> left_;
  std::map<std::string, std::vector<Embedding>> right_;
  std::size_t dimension_ = 0;
};

/// One verification claim with its ground-truth label.
struct ScoreRecord {
  std::string probe_id;
  std::string claimed_id;
  double score = 0.0;  // in [0, 1]
  bool genuine = false;
  ConditionTag condition;
  std::string true_id;  // empty when withheld
};

struct ScoreSet {
  std::vector<ScoreRecord> records;
};

/// Competition submission: one score per probe in probe order plus one
/// decision threshold.
struct Submission {
  std::vector<double> scores;
  double threshold = 0.0;
};

struct Rates {
  double fmr = 0.0;   // accepted impostors, percent
  double fnmr = 0.0;  // rejected genuines, percent
  double acc = 0.0;
  double bacc = 0.0;
};

struct EerResult {
  double eer = 0.0;  // percent
  double threshold = 0.0;
};

struct Fmr100Result {
  double fnmr = 0.0;  // percent, at the smallest threshold with FMR <= 1%
  bool low_resolution = false;  // fewer than 100 impostors
};

struct DetPoint {
  double threshold = 0.0;
  double fmr = 0.0;
  double fnmr = 0.0;
};

struct MetricsReport {
  double eer = 0.0;
  double eer_threshold = 0.0;
  double fmr100 = 0.0;
  bool fmr100_low_resolution = false;
  double acc = 0.0;
  double bacc = 0.0;
  double fnmr = 0.0;
  double fmr = 0.0;
  std::vector<DetPoint> det_points;
};

struct StratumEer {
  std::string label;
  double eer = 0.0;
  double threshold = 0.0;
  std::size_t genuine_count = 0;
};

/// Strata with no genuine claims cannot carry an error rate and are listed
/// under `omitted` instead.
struct StratifiedReport {
  std::vector<StratumEer> strata;
  std::vector<std::string> omitted;
};

enum class StratifyBy { footwear, speed, condition };

/// One model's misclassified probes, split by error kind. The two sets must
/// be disjoint.
struct ModelDecisions {
  std::string model;
  std::set<std::string> false_matches;
  std::set<std::string> false_non_matches;
};

struct PairOverlap {
  std::size_t a = 0;
  std::size_t b = 0;
  std::size_t count = 0;
};

struct OverlapReport {
  std::vector<std::string> models;
  std::vector<PairOverlap> pairwise;
  std::vector<std::string> common;  // misclassified by every model
  std::size_t common_false_matches = 0;
  std::size_t common_false_non_matches = 0;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

/// Mean cosine similarity between the probe and the claimed identity's five
/// same-side references.
double match_score(const Embedding& probe, const ReferenceGallery& gallery,
                   const std::string& claimed_id);

double logistic(double z);

/// Population z-score of `raw` against the cohort; a zero-spread cohort
/// pins z to 0.
double cohort_z(double raw, const std::vector<double>& cohort_raws);

/// z-normalized score squashed into [0, 1] with the logistic function.
double cohort_normalize(double raw, const std::vector<double>& cohort_raws);

/// Full claim scoring: raw match score z-normalized against the cohort of
/// every other enrolled identity (same side), squashed to [0, 1].
double score_claim(const Embedding& probe, const ReferenceGallery& gallery,
                   const std::string& claimed_id);

/// Decision rule is score >= threshold throughout.
Rates rates_at_threshold(const ScoreSet& s, double threshold);

/// Sweeps every distinct score (plus a reject-all endpoint); at the
/// operating point where rejected-genuine and accepted-impostor rates
/// cross, returns their common value, linearly interpolating between the
/// two adjacent operating points when no exact crossing exists.
EerResult compute_eer(const ScoreSet& s);

Fmr100Result fmr100(const ScoreSet& s);

/// Operating points ordered by ascending threshold, keeping the lowest
/// false-non-match point for each distinct false-match rate, so fmr is
/// strictly decreasing along the curve. Includes the accept-all and
/// reject-all ends, so some adjacent pair always brackets the EER crossing.
std::vector<DetPoint> det_curve(const ScoreSet& s);

/// Per-stratum EER with genuine claims filtered by condition and the
/// impostor pool kept global.
StratifiedReport stratified_eer(const ScoreSet& s, StratifyBy group_by);

OverlapReport misclassification_overlap(const std::vector<ModelDecisions>& models);

/// Everything the leaderboard reports for one submission: threshold-free
/// metrics from the sweep plus the fixed-threshold rates.
MetricsReport compute_metrics(const ScoreSet& s, double threshold);

}  // namespace stride
