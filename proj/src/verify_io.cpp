#include "stride/verify_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace stride {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

/// Splits on newlines; a single trailing newline does not create a line.
std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto pos = text.find('\n', start);
    if (pos == std::string::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      return fields;
    }
    fields.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
}

double parse_score(const std::string& token, std::size_t line_no) {
  const std::string t = trim(token);
  if (t.empty()) {
    throw SubmissionError("line " + std::to_string(line_no) + ": empty line", line_no);
  }
  double value = 0.0;
  const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc{} || end != t.data() + t.size() || !std::isfinite(value)) {
    throw SubmissionError(
        "line " + std::to_string(line_no) + ": '" + t + "' is not a numeric score",
        line_no);
  }
  if (value < 0.0 || value > 1.0) {
    throw SubmissionError("line " + std::to_string(line_no) + ": score " + t +
                              " is outside the required range [0, 1]",
                          line_no);
  }
  return value;
}

double parse_double_field(const std::string& token, std::size_t line_no,
                          const std::string& what) {
  double value = 0.0;
  const auto [end, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || end != token.data() + token.size() || !std::isfinite(value)) {
    throw SubmissionError(
        "line " + std::to_string(line_no) + ": '" + token + "' is not a valid " + what,
        line_no);
  }
  return value;
}

}  // namespace

Submission parse_submission(const std::string& scores_text,
                            const std::string& threshold_text,
                            std::size_t expected_count) {
  const std::vector<std::string> lines = split_lines(scores_text);
  if (lines.empty()) {
    throw SubmissionError("scores file is empty", 0);
  }
  if (lines.size() != expected_count) {
    throw SubmissionError("wrong number of scores: expected " +
                              std::to_string(expected_count) + ", found " +
                              std::to_string(lines.size()),
                          0);
  }
  Submission out;
  out.scores.reserve(lines.size());
  for (std::size_t i = 0; i < lines.size(); ++i) {
    out.scores.push_back(parse_score(lines[i], i + 1));
  }

  const std::vector<std::string> tlines = split_lines(threshold_text);
  std::vector<std::string> tokens;
  for (std::size_t i = 0; i < tlines.size(); ++i) {
    if (!trim(tlines[i]).empty()) tokens.push_back(trim(tlines[i]));
  }
  if (tokens.empty()) {
    throw SubmissionError("threshold file is empty", 0);
  }
  if (tokens.size() != 1) {
    throw SubmissionError("threshold file must hold exactly one value, found " +
                              std::to_string(tokens.size()),
                          0);
  }
  double t = 0.0;
  const auto [end, ec] =
      std::from_chars(tokens[0].data(), tokens[0].data() + tokens[0].size(), t);
  if (ec != std::errc{} || end != tokens[0].data() + tokens[0].size() ||
      !std::isfinite(t)) {
    throw SubmissionError("threshold '" + tokens[0] + "' is not a finite number", 1);
  }
  out.threshold = t;
  return out;
}

std::vector<ManifestEntry> parse_manifest(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty()) throw SubmissionError("manifest is empty", 0);
  const std::string header = "probe_id,claimed_id,true_id,label,footwear,speed";
  if (trim(lines[0]) != header) {
    throw SubmissionError("line 1: manifest header must be '" + header + "'", 1);
  }
  std::vector<ManifestEntry> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != 6) {
      throw SubmissionError(
          "line " + std::to_string(line_no) + ": expected 6 fields, found " +
              std::to_string(f.size()),
          line_no);
    }
    ManifestEntry e;
    e.probe_id = f[0];
    e.claimed_id = f[1];
    e.true_id = f[2];
    if (e.probe_id.empty() || e.claimed_id.empty()) {
      throw SubmissionError("line " + std::to_string(line_no) + ": empty id", line_no);
    }
    if (f[3] == "genuine") {
      e.genuine = true;
    } else if (f[3] == "impostor") {
      e.genuine = false;
    } else {
      throw SubmissionError("line " + std::to_string(line_no) + ": label '" + f[3] +
                                "' must be genuine or impostor",
                            line_no);
    }
    if (!e.true_id.empty() && e.genuine != (e.claimed_id == e.true_id)) {
      throw SubmissionError(
          "line " + std::to_string(line_no) + ": label disagrees with the id columns",
          line_no);
    }
    try {
      e.condition.footwear = footwear_from_string(f[4]);
      e.condition.speed = speed_from_string(f[5]);
    } catch (const std::invalid_argument& err) {
      throw SubmissionError("line " + std::to_string(line_no) + ": " + err.what(),
                            line_no);
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string manifest_to_csv(const std::vector<ManifestEntry>& entries) {
  std::ostringstream out;
  out << "probe_id,claimed_id,true_id,label,footwear,speed\n";
  for (const auto& e : entries) {
    out << e.probe_id << ',' << e.claimed_id << ',' << e.true_id << ','
        << (e.genuine ? "genuine" : "impostor") << ',' << to_string(e.condition.footwear)
        << ',' << to_string(e.condition.speed) << '\n';
  }
  return out.str();
}

ScoreSet build_score_set(const std::vector<ManifestEntry>& manifest,
                         const Submission& submission) {
  if (manifest.size() != submission.scores.size()) {
    throw SubmissionError("manifest has " + std::to_string(manifest.size()) +
                              " probes but the submission has " +
                              std::to_string(submission.scores.size()) + " scores",
                          0);
  }
  ScoreSet s;
  s.records.reserve(manifest.size());
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    const ManifestEntry& e = manifest[i];
    s.records.push_back(
        {e.probe_id, e.claimed_id, submission.scores[i], e.genuine, e.condition, e.true_id});
  }
  return s;
}

std::vector<Embedding> parse_embeddings(const std::string& text) {
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty()) throw SubmissionError("embeddings file is empty", 0);
  const auto header = split_fields(lines[0]);
  if (header.size() < 5 || header[0] != "id" || header[1] != "side" ||
      header[2] != "footwear" || header[3] != "speed") {
    throw SubmissionError(
        "line 1: embeddings header must be 'id,side,footwear,speed,v0,...'", 1);
  }
  const std::size_t dim = header.size() - 4;
  std::vector<Embedding> out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != header.size()) {
      throw SubmissionError(
          "line " + std::to_string(line_no) + ": expected " +
              std::to_string(header.size()) + " fields, found " + std::to_string(f.size()),
          line_no);
    }
    Embedding e;
    e.id = f[0];
    try {
      e.side = side_from_string(f[1]);
      e.condition.footwear = footwear_from_string(f[2]);
      e.condition.speed = speed_from_string(f[3]);
    } catch (const std::invalid_argument& err) {
      throw SubmissionError("line " + std::to_string(line_no) + ": " + err.what(),
                            line_no);
    }
    e.vector.reserve(dim);
    for (std::size_t d = 0; d < dim; ++d) {
      e.vector.push_back(parse_double_field(f[4 + d], line_no, "embedding value"));
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::string embeddings_to_csv(const std::vector<Embedding>& embeddings) {
  std::ostringstream out;
  out << "id,side,footwear,speed";
  const std::size_t dim = embeddings.empty() ? 0 : embeddings.front().vector.size();
  for (std::size_t d = 0; d < dim; ++d) out << ",v" << d;
  out << '\n';
  out.precision(17);
  for (const auto& e : embeddings) {
    out << e.id << ',' << to_string(e.side) << ',' << to_string(e.condition.footwear)
        << ',' << to_string(e.condition.speed);
    for (double v : e.vector) out << ',' << v;
    out << '\n';
  }
  return out.str();
}

ModelDecisions parse_decisions(const std::string& model_name, const std::string& text) {
  ModelDecisions out;
  out.model = model_name;
  const std::vector<std::string> lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const std::size_t line_no = i + 1;
    const auto f = split_fields(lines[i]);
    if (f.size() != 2 || f[0].empty()) {
      throw SubmissionError("line " + std::to_string(line_no) +
                                ": expected 'probe_id,false_match|false_non_match'",
                            line_no);
    }
    if (f[1] == "false_match") {
      out.false_matches.insert(f[0]);
    } else if (f[1] == "false_non_match") {
      out.false_non_matches.insert(f[0]);
    } else {
      throw SubmissionError("line " + std::to_string(line_no) + ": unknown error kind '" +
                                f[1] + "'",
                            line_no);
    }
  }
  return out;
}

std::string det_to_csv(const std::vector<DetPoint>& points) {
  std::ostringstream out;
  out << "threshold,fmr,fnmr\n";
  out.precision(17);
  for (const auto& p : points) {
    out << p.threshold << ',' << p.fmr << ',' << p.fnmr << '\n';
  }
  return out.str();
}

nlohmann::json metrics_to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["eer"] = m.eer;
  j["eer_threshold"] = m.eer_threshold;
  j["fmr100"] = m.fmr100;
  j["fmr100_low_resolution"] = m.fmr100_low_resolution;
  j["acc"] = m.acc;
  j["bacc"] = m.bacc;
  j["fnmr"] = m.fnmr;
  j["fmr"] = m.fmr;
  return j;
}

nlohmann::json stratified_to_json(const StratifiedReport& r) {
  nlohmann::json j;
  j["strata"] = nlohmann::json::array();
  for (const auto& s : r.strata) {
    j["strata"].push_back({{"label", s.label},
                           {"eer", s.eer},
                           {"threshold", s.threshold},
                           {"genuine_count", s.genuine_count}});
  }
  j["omitted"] = r.omitted;
  return j;
}

nlohmann::json overlap_to_json(const OverlapReport& r) {
  nlohmann::json j;
  j["models"] = r.models;
  j["pairwise"] = nlohmann::json::array();
  for (const auto& p : r.pairwise) {
    j["pairwise"].push_back({{"a", r.models[p.a]}, {"b", r.models[p.b]}, {"count", p.count}});
  }
  j["common_count"] = r.common.size();
  j["common_false_matches"] = r.common_false_matches;
  j["common_false_non_matches"] = r.common_false_non_matches;
  j["common"] = r.common;
  return j;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

}  // namespace stride
