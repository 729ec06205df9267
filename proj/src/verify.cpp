#include "stride/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace stride {

namespace {

void check_scores(const ScoreSet& s) {
  for (std::size_t i = 0; i < s.records.size(); ++i) {
    const double v = s.records[i].score;
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw std::invalid_argument("score record " + std::to_string(i) +
                                  " is outside [0, 1]");
    }
  }
}

struct ClassCounts {
  std::int64_t genuine = 0;
  std::int64_t impostor = 0;
};

ClassCounts count_classes(const ScoreSet& s) {
  ClassCounts c;
  for (const auto& r : s.records) (r.genuine ? c.genuine : c.impostor) += 1;
  return c;
}

void require_both_classes(const ClassCounts& c) {
  if (c.genuine == 0 || c.impostor == 0) {
    throw std::invalid_argument(
        "threshold metrics need at least one genuine and one impostor record");
  }
}

/// One candidate threshold with cumulative error counts under the
/// score >= threshold rule.
struct SweepPoint {
  double threshold = 0.0;
  std::int64_t rejected_genuines = 0;
  std::int64_t accepted_impostors = 0;
};

/// Operating points at every distinct score, ascending, plus a final
/// reject-all point just above the top score.
std::vector<SweepPoint> sweep_points(const ScoreSet& s, const ClassCounts& totals) {
  std::vector<std::pair<double, bool>> scored;
  scored.reserve(s.records.size());
  for (const auto& r : s.records) scored.emplace_back(r.score, r.genuine);
  std::sort(scored.begin(), scored.end());

  std::vector<SweepPoint> points;
  std::int64_t below_genuine = 0, below_impostor = 0;
  std::size_t i = 0;
  while (i < scored.size()) {
    const double t = scored[i].first;
    points.push_back({t, below_genuine, totals.impostor - below_impostor});
    while (i < scored.size() && scored[i].first == t) {
      (scored[i].second ? below_genuine : below_impostor) += 1;
      ++i;
    }
  }
  points.push_back({scored.back().first + 1.0, totals.genuine, 0});
  return points;
}

double pct(std::int64_t part, std::int64_t whole) {
  return 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

std::string to_string(Side s) { return s == Side::left ? "left" : "right"; }

Side side_from_string(const std::string& s) {
  if (s == "left") return Side::left;
  if (s == "right") return Side::right;
  throw std::invalid_argument("unknown side '" + s + "'");
}

ReferenceGallery::ReferenceGallery(const std::vector<Embedding>& refs) {
  if (refs.empty()) throw std::invalid_argument("empty reference gallery");
  dimension_ = refs.front().vector.size();
  for (const auto& e : refs) {
    if (e.vector.size() != dimension_) {
      throw std::invalid_argument("embedding dimension mismatch for id '" + e.id + "'");
    }
    double norm2 = 0.0;
    for (double v : e.vector) {
      if (!std::isfinite(v)) {
        throw std::invalid_argument("non-finite embedding entry for id '" + e.id + "'");
      }
      norm2 += v * v;
    }
    if (norm2 == 0.0) {
      throw std::invalid_argument("zero-norm embedding for id '" + e.id + "'");
    }
    (e.side == Side::left ? left_ : right_)[e.id].push_back(e);
  }
  for (const auto& [id, v] : left_) {
    if (v.size() != kPerSide || !right_.count(id) || right_.at(id).size() != kPerSide) {
      throw std::invalid_argument("identity '" + id +
                                  "' does not have exactly five references per side");
    }
  }
  for (const auto& [id, v] : right_) {
    if (!left_.count(id)) {
      throw std::invalid_argument("identity '" + id +
                                  "' does not have exactly five references per side");
    }
  }
}

const std::vector<Embedding>& ReferenceGallery::references(const std::string& id,
                                                           Side side) const {
  const auto& bank = side == Side::left ? left_ : right_;
  const auto it = bank.find(id);
  if (it == bank.end()) throw std::invalid_argument("identity '" + id + "' not enrolled");
  return it->second;
}

bool ReferenceGallery::enrolled(const std::string& id) const { return left_.count(id) > 0; }

std::vector<std::string> ReferenceGallery::identities() const {
  std::vector<std::string> out;
  out.reserve(left_.size());
  for (const auto& [id, _] : left_) out.push_back(id);
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("cosine similarity needs equal dimensions");
  }
  if (a.empty()) throw std::invalid_argument("cosine similarity of empty vectors");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("cosine similarity of a zero-norm vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

double match_score(const Embedding& probe, const ReferenceGallery& gallery,
                   const std::string& claimed_id) {
  const auto& refs = gallery.references(claimed_id, probe.side);
  double sum = 0.0;
  for (const auto& r : refs) sum += cosine_similarity(probe.vector, r.vector);
  return sum / static_cast<double>(refs.size());
}

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double cohort_z(double raw, const std::vector<double>& cohort_raws) {
  if (cohort_raws.size() < 2) {
    throw std::invalid_argument("cohort normalization needs at least two cohort scores");
  }
  double mean = 0.0;
  for (double v : cohort_raws) mean += v;
  mean /= static_cast<double>(cohort_raws.size());
  double var = 0.0;
  for (double v : cohort_raws) var += (v - mean) * (v - mean);
  var /= static_cast<double>(cohort_raws.size());
  // a cohort whose spread is pure rounding noise counts as constant
  const double std_dev = std::sqrt(var);
  if (std_dev <= 1e-12 * std::max(1.0, std::abs(mean))) return 0.0;
  return (raw - mean) / std_dev;
}

double cohort_normalize(double raw, const std::vector<double>& cohort_raws) {
  return logistic(cohort_z(raw, cohort_raws));
}

double score_claim(const Embedding& probe, const ReferenceGallery& gallery,
                   const std::string& claimed_id) {
  const double raw = match_score(probe, gallery, claimed_id);
  std::vector<double> cohort;
  for (const auto& id : gallery.identities()) {
    if (id != claimed_id) cohort.push_back(match_score(probe, gallery, id));
  }
  return cohort_normalize(raw, cohort);
}

Rates rates_at_threshold(const ScoreSet& s, double threshold) {
  check_scores(s);
  const ClassCounts totals = count_classes(s);
  require_both_classes(totals);
  std::int64_t rejected_genuines = 0, accepted_impostors = 0;
  for (const auto& r : s.records) {
    const bool accepted = r.score >= threshold;
    if (r.genuine && !accepted) ++rejected_genuines;
    if (!r.genuine && accepted) ++accepted_impostors;
  }
  Rates out;
  out.fmr = pct(accepted_impostors, totals.impostor);
  out.fnmr = pct(rejected_genuines, totals.genuine);
  out.acc = pct(totals.genuine + totals.impostor - rejected_genuines - accepted_impostors,
                totals.genuine + totals.impostor);
  out.bacc = 100.0 - (out.fmr + out.fnmr) / 2.0;
  return out;
}

EerResult compute_eer(const ScoreSet& s) {
  check_scores(s);
  const ClassCounts totals = count_classes(s);
  require_both_classes(totals);
  const std::vector<SweepPoint> pts = sweep_points(s, totals);

  // signed crossing indicator, exact in integers:
  // fnmr - fmr has the sign of rg * impostors - ai * genuines
  auto diff = [&](const SweepPoint& p) {
    return p.rejected_genuines * totals.impostor - p.accepted_impostors * totals.genuine;
  };
  std::size_t hi = 0;
  while (hi < pts.size() && diff(pts[hi]) < 0) ++hi;
  // the reject-all endpoint has fnmr 100 > fmr 0, so hi is in range
  const SweepPoint& b = pts[hi];
  const double fmr_hi = pct(b.accepted_impostors, totals.impostor);
  const double fnmr_hi = pct(b.rejected_genuines, totals.genuine);
  if (diff(b) == 0 || hi == 0) {
    return {(fmr_hi + fnmr_hi) / 2.0, b.threshold};
  }
  const SweepPoint& a = pts[hi - 1];
  const double fmr_lo = pct(a.accepted_impostors, totals.impostor);
  const double fnmr_lo = pct(a.rejected_genuines, totals.genuine);
  const double gap = (fnmr_hi - fnmr_lo) + (fmr_lo - fmr_hi);
  const double t = (fmr_lo - fnmr_lo) / gap;
  const double eer =
      ((fmr_lo + t * (fmr_hi - fmr_lo)) + (fnmr_lo + t * (fnmr_hi - fnmr_lo))) / 2.0;
  return {eer, a.threshold + t * (b.threshold - a.threshold)};
}

Fmr100Result fmr100(const ScoreSet& s) {
  check_scores(s);
  const ClassCounts totals = count_classes(s);
  require_both_classes(totals);
  Fmr100Result out;
  out.low_resolution = totals.impostor < 100;
  for (const SweepPoint& p : sweep_points(s, totals)) {
    // fmr <= 1% without rounding: 100 * ai <= impostors
    if (p.accepted_impostors * 100 <= totals.impostor) {
      out.fnmr = pct(p.rejected_genuines, totals.genuine);
      return out;
    }
  }
  throw std::logic_error("threshold sweep missed its reject-all endpoint");
}

std::vector<DetPoint> det_curve(const ScoreSet& s) {
  check_scores(s);
  const ClassCounts totals = count_classes(s);
  require_both_classes(totals);
  std::vector<DetPoint> out;
  std::int64_t last_ai = -1;
  for (const SweepPoint& p : sweep_points(s, totals)) {
    if (p.accepted_impostors == last_ai) continue;  // keep the lowest-fnmr point
    last_ai = p.accepted_impostors;
    out.push_back({p.threshold, pct(p.accepted_impostors, totals.impostor),
                   pct(p.rejected_genuines, totals.genuine)});
  }
  return out;
}

StratifiedReport stratified_eer(const ScoreSet& s, StratifyBy group_by) {
  check_scores(s);
  const ClassCounts totals = count_classes(s);
  require_both_classes(totals);
  auto label_of = [&](const ConditionTag& c) {
    switch (group_by) {
      case StratifyBy::footwear: return to_string(c.footwear);
      case StratifyBy::speed: return to_string(c.speed);
      case StratifyBy::condition: return to_string(c);
    }
    throw std::logic_error("unhandled stratification");
  };

  std::vector<ScoreRecord> impostors;
  std::map<std::string, std::vector<ScoreRecord>> genuine_by_label;
  std::set<std::string> seen_labels;
  for (const auto& r : s.records) {
    seen_labels.insert(label_of(r.condition));
    if (r.genuine) {
      genuine_by_label[label_of(r.condition)].push_back(r);
    } else {
      impostors.push_back(r);
    }
  }

  StratifiedReport report;
  for (const std::string& label : seen_labels) {
    const auto it = genuine_by_label.find(label);
    if (it == genuine_by_label.end()) {
      report.omitted.push_back(label);
      continue;
    }
    ScoreSet stratum;
    stratum.records = it->second;
    stratum.records.insert(stratum.records.end(), impostors.begin(), impostors.end());
    const EerResult e = compute_eer(stratum);
    report.strata.push_back({label, e.eer, e.threshold, it->second.size()});
  }
  return report;
}

OverlapReport misclassification_overlap(const std::vector<ModelDecisions>& models) {
  if (models.size() < 2) {
    throw std::invalid_argument("overlap analysis needs at least two models");
  }
  std::vector<std::set<std::string>> all(models.size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (const auto& id : models[i].false_matches) {
      if (models[i].false_non_matches.count(id)) {
        throw std::invalid_argument("probe '" + id + "' listed under both error kinds");
      }
      all[i].insert(id);
    }
    all[i].insert(models[i].false_non_matches.begin(), models[i].false_non_matches.end());
  }

  OverlapReport report;
  for (const auto& m : models) report.models.push_back(m.model);
  for (std::size_t i = 0; i < models.size(); ++i) {
    for (std::size_t j = i + 1; j < models.size(); ++j) {
      std::size_t count = 0;
      for (const auto& id : all[i]) count += all[j].count(id);
      report.pairwise.push_back({i, j, count});
    }
  }
  for (const auto& id : all[0]) {
    bool everywhere = true;
    for (std::size_t i = 1; i < models.size() && everywhere; ++i) {
      everywhere = all[i].count(id) > 0;
    }
    if (!everywhere) continue;
    report.common.push_back(id);
    if (models[0].false_matches.count(id)) {
      ++report.common_false_matches;
    } else {
      ++report.common_false_non_matches;
    }
  }
  return report;
}

MetricsReport compute_metrics(const ScoreSet& s, double threshold) {
  MetricsReport m;
  const EerResult e = compute_eer(s);
  m.eer = e.eer;
  m.eer_threshold = e.threshold;
  const Fmr100Result f = fmr100(s);
  m.fmr100 = f.fnmr;
  m.fmr100_low_resolution = f.low_resolution;
  const Rates r = rates_at_threshold(s, threshold);
  m.acc = r.acc;
  m.bacc = r.bacc;
  m.fnmr = r.fnmr;
  m.fmr = r.fmr;
  m.det_points = det_curve(s);
  return m;
}

}  // namespace stride
