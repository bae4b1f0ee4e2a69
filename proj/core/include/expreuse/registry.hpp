#pragma once

#include <expreuse/language.hpp>
#include <expreuse/scheme.hpp>

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace expreuse {

struct DecompositionRule {
  std::string request_language;
  std::function<std::vector<Request>(const Query&)> decompose;
  /// Responses arrive paired with the request they fulfil, in decomposition order.
  std::function<Answer(const Query&, std::span<const RequestResponse>)> aggregate;
  /// Cross-variable checks beyond per-variable domains; throws DomainViolation.
  std::function<void(const Query&)> validate;
};

struct CompletionRule {
  std::string spec_language;
  /// Ordered consistently with the spec language's kind order.
  std::function<std::vector<ExperimentSpec>(const Request&)> complete;
  /// Receives the results of the result-bearing specs completed from the request.
  std::function<Response(const Request&, std::span<const ExperimentResult>)> compute;
};

using ExecuteFn = std::function<ExperimentResult(const ExperimentSpec&)>;

/// Write-once registry of the three layer languages, the translation rules between
/// them, the executors and the per-layer reasoning schemes.
///
/// Languages are immutable after registration. Rules and schemes are registered once
/// per language id as well; a different behaviour means a different id.
class LanguageRegistry {
 public:
  std::string register_language(QueryLanguage lang);
  std::string register_language(RequestLanguage lang);
  std::string register_language(SpecLanguage lang);

  void register_decomposer(const std::string& query_language, DecompositionRule rule);
  void register_completer(const std::string& request_language, CompletionRule rule);
  void register_executor(const std::string& spec_language, ExecuteFn executor);

  void register_scheme(const std::string& query_language, QueryScheme scheme);
  void register_scheme(const std::string& request_language, RequestScheme scheme);
  void register_scheme(const std::string& spec_language, SpecScheme scheme);

  [[nodiscard]] const QueryLanguage& query_language(const std::string& id) const;
  [[nodiscard]] const RequestLanguage& request_language(const std::string& id) const;
  [[nodiscard]] const SpecLanguage& spec_language(const std::string& id) const;
  [[nodiscard]] bool has_query_language(const std::string& id) const;
  [[nodiscard]] std::vector<std::string> query_language_ids() const;

  [[nodiscard]] const DecompositionRule& decomposer(const std::string& query_language) const;
  [[nodiscard]] const CompletionRule& completer(const std::string& request_language) const;
  [[nodiscard]] const ExecuteFn& executor(const std::string& spec_language) const;

  [[nodiscard]] const QueryScheme* query_scheme(const std::string& id) const;
  [[nodiscard]] const RequestScheme* request_scheme(const std::string& id) const;
  [[nodiscard]] const SpecScheme* spec_scheme(const std::string& id) const;

  /// Resolves variable aliases to canonical names.
  [[nodiscard]] Query canonicalize(Query q) const;

  /// Does `before` have to run before `after` (strictly) under the language's order?
  [[nodiscard]] bool precedes(const std::string& spec_language, const std::string& before,
                              const std::string& after) const;

 private:
  struct SpecOrder {
    std::vector<std::string> kinds;
    std::vector<std::vector<bool>> leq;  // reflexive-transitive closure
  };

  std::map<std::string, QueryLanguage, std::less<>> query_langs_;
  std::map<std::string, RequestLanguage, std::less<>> request_langs_;
  std::map<std::string, SpecLanguage, std::less<>> spec_langs_;
  std::map<std::string, SpecOrder, std::less<>> spec_orders_;
  std::map<std::string, DecompositionRule, std::less<>> decomposers_;
  std::map<std::string, CompletionRule, std::less<>> completers_;
  std::map<std::string, ExecuteFn, std::less<>> executors_;
  std::map<std::string, QueryScheme, std::less<>> query_schemes_;
  std::map<std::string, RequestScheme, std::less<>> request_schemes_;
  std::map<std::string, SpecScheme, std::less<>> spec_schemes_;

  void ensure_fresh_id(const std::string& id) const;
};

// ---------------------------------------------------------------------------
// Layer translations. All are pure given the registry.
// ---------------------------------------------------------------------------

/// Throws UnknownLanguage, SchemeMismatch or DomainViolation.
void validate_query(const LanguageRegistry& registry, const Query& q);
void validate_request(const LanguageRegistry& registry, const Request& r);

/// Validated, de-duplicated, non-empty decomposition (insertion order preserved).
std::vector<Request> decompose(const LanguageRegistry& registry, const Query& q);

Answer aggregate(const LanguageRegistry& registry, const Query& q,
                 std::span<const RequestResponse> responses);

std::vector<ExperimentSpec> complete(const LanguageRegistry& registry, const Request& r);

Response compute(const LanguageRegistry& registry, const Request& r,
                 std::span<const ExperimentResult> results);

ExperimentResult execute(const LanguageRegistry& registry, const ExperimentSpec& spec);

/// Result-bearing specs of a completion, in order.
std::vector<ExperimentSpec> result_specs(const LanguageRegistry& registry,
                                         const std::vector<ExperimentSpec>& specs);

/// Reference path: decompose, complete, execute, compute, aggregate with no store.
Answer answer_without_reuse(const LanguageRegistry& registry, const Query& q);

// ---------------------------------------------------------------------------
// Compatibility
// ---------------------------------------------------------------------------

using AnsweredByFn = std::function<bool(const Query&, const Answer&)>;

struct CompatibilityFailure {
  std::string query_key;
  std::string answer;
  std::string reason;
};

struct CompatibilityReport {
  std::size_t checked = 0;
  std::vector<CompatibilityFailure> failures;
  [[nodiscard]] bool passed() const { return failures.empty(); }
};

/// Runs every sample query end to end and asks `answered_by` whether the produced
/// answer is correct. Errors raised by the pipeline are reported, not thrown.
CompatibilityReport check_compatibility(const LanguageRegistry& registry,
                                        const std::string& query_language,
                                        std::span<const Query> samples,
                                        const AnsweredByFn& answered_by);

}  // namespace expreuse
