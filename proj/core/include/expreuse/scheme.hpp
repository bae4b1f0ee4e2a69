#pragma once

#include <expreuse/language.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace expreuse {

enum class Layer { User, Decomposition, Execution };

std::string_view to_string(Layer layer) noexcept;

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

using EntryId = std::uint64_t;

/// Pre-extracted comparison data for one item: distances compare `x` only when the
/// `group` strings (language, poi set, symbols, ...) are identical.
struct Features {
  std::string group;
  std::vector<double> x;
};

using DistanceFn = std::function<double(const Features&, const Features&)>;

/// Everything a justify rule may look at. `stored_responses` is the response set the
/// stored query was aggregated from, when the store still holds it (user layer only).
template <class Item, class Val>
struct JustifyArgs {
  const Item& fresh;
  const Features& fresh_features;
  const Item& stored;
  const Features& stored_features;
  const Val& stored_value;
  EntryId stored_id = 0;
  const std::vector<RequestResponse>* stored_responses = nullptr;
};

template <class Item, class Val>
using JustifyFn = std::function<std::optional<Val>(const JustifyArgs<Item, Val>&)>;

/// Per-layer retrieval/recomputation distances, thresholds and the justify rule.
/// Thresholds compare strictly (`distance < threshold`), so a zero threshold disables
/// the mechanism.
template <class Item, class Val>
struct ReasoningScheme {
  Layer layer = Layer::User;
  std::function<Features(const Item&)> featurize;
  DistanceFn get_distance;
  double t_get = 0.0;
  DistanceFn comp_distance;  // absent on the execution layer
  double t_comp = 0.0;
  JustifyFn<Item, Val> justify;
  /// Stored values that can ever seed `justify`; the store indexes them separately.
  /// Absent means every stored value is a candidate.
  std::function<bool(const Val&)> justify_source;
};

using QueryScheme = ReasoningScheme<Query, Answer>;
using RequestScheme = ReasoningScheme<Request, Response>;
using SpecScheme = ReasoningScheme<ExperimentSpec, ExperimentResult>;

/// Per-axis tolerance distance: 0 if every |a_i - b_i| <= tolerance_i and the groups
/// match, infinity otherwise.
DistanceFn tolerance_distance(std::vector<double> tolerances);

/// 0 if groups and all coordinates are bitwise equal, infinity otherwise.
DistanceFn exact_distance();

}  // namespace expreuse
