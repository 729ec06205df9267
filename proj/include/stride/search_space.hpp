#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace stride {

class SpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Opaque label for one model family (e.g. "R2plus1D", "ViT").
struct ArchitectureClass {
  std::string name;

  bool operator==(const ArchitectureClass&) const = default;
};

struct ContinuousParam {
  double lo = 0.0;
  double hi = 1.0;
  bool log_scale = false;
};

struct IntegerParam {
  std::int64_t lo = 0;
  std::int64_t hi = 1;
};

struct CategoricalParam {
  std::vector<std::string> values;
};

/// Fixed-length tuple of integers with per-element bounds. Kept as one
/// parameter so genetic operators and grids can treat it atomically.
struct IntTupleParam {
  std::vector<std::int64_t> lo;
  std::vector<std::int64_t> hi;

  std::size_t length() const { return lo.size(); }
};

using ParamKind =
    std::variant<ContinuousParam, IntegerParam, CategoricalParam, IntTupleParam>;

struct ParameterSpec {
  std::string name;
  ParamKind kind;
};

using ParamValue =
    std::variant<double, std::int64_t, std::string, std::vector<std::int64_t>>;

std::string to_string(const ParamValue& v);

/// One sampled point of the search domain: parameter name -> value.
/// std::map keeps serialization order stable.
struct Configuration {
  std::map<std::string, ParamValue> assignments;

  bool operator==(const Configuration&) const = default;
};

/// Joint architecture + hyperparameter domain. Parameters are shared across
/// classes; a class listed in `overrides` replaces the named specs for that
/// class only.
struct SearchSpace {
  std::vector<ArchitectureClass> classes;
  std::vector<ParameterSpec> params;
  std::map<std::string, std::vector<ParameterSpec>> overrides;

  /// Throws SpaceError unless classes/params satisfy all structural
  /// invariants (unique non-empty names, sane bounds, lo>0 under log scale).
  void validate() const;

  /// Effective parameter list for a class: shared params with any per-class
  /// replacements applied. Unknown class name throws.
  std::vector<ParameterSpec> params_for(const std::string& class_name) const;

  const ParameterSpec& param(const std::string& name) const;
  bool has_class(const std::string& name) const;
};

/// Finite, ordered pool of configurations; the action id is the index.
struct ActionSet {
  std::vector<Configuration> actions;

  std::size_t size() const { return actions.size(); }
  const Configuration& at(std::size_t id) const { return actions.at(id); }
};

/// Uniform draw over every parameter's domain (log-uniform where flagged).
Configuration sample_random(const SearchSpace& space, std::mt19937_64& rng);
Configuration sample_random(const SearchSpace& space, std::uint64_t seed);

/// Returns one message per bound/membership/missing-key/unknown-key
/// violation; empty means valid.
std::vector<std::string> validate_config(const SearchSpace& space,
                                         const Configuration& config);

struct DiscretizeOptions {
  int bins_per_continuous = 8;
  std::size_t max_actions = 512;  // subsample cap on the full product
};

/// Cartesian product of per-parameter grids, capped at max_actions by
/// seeded uniform subsampling. Deterministic given (space, options, seed).
ActionSet discretize(const SearchSpace& space, const DiscretizeOptions& opts,
                     std::uint64_t seed);

/// Number of coordinates encode_unit_cube produces for this space.
std::size_t encode_dim(const SearchSpace& space);

/// Maps a valid configuration into [0,1]^d: continuous/integer params get one
/// affine (log-affine) coordinate, categoricals a one-hot block, tuples one
/// coordinate per element.
std::vector<double> encode_unit_cube(const SearchSpace& space,
                                     const Configuration& config);

/// Inverse of encode_unit_cube up to rounding: integers round to the nearest
/// admissible value, categoricals take the block argmax.
Configuration decode_unit_cube(const SearchSpace& space,
                               const std::vector<double>& x);

/// Search-space file I/O (JSON; schema documented in the README).
SearchSpace space_from_json_text(const std::string& text);
SearchSpace space_from_file(const std::string& path);
std::string space_to_json_text(const SearchSpace& space);

}  // namespace stride
