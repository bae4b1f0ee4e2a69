#pragma once

#include <expreuse/language.hpp>
#include <expreuse/scheme.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace expreuse {

/// Columnar block for one result: see docs/FORMAT.md.
std::vector<char> encode_trace_block(EntryId id, const ExperimentResult& result);
ExperimentResult decode_trace_block(const char* data, std::size_t size, EntryId* id = nullptr);
/// Encoded size without encoding.
std::size_t trace_block_size(const ExperimentResult& result);

/// Time-series side of the store. Holds the traces of P results, keyed by entry id.
class TraceStore {
 public:
  virtual ~TraceStore() = default;
  virtual void put(EntryId id, const ExperimentResult& result) = 0;
  [[nodiscard]] virtual std::optional<ExperimentResult> get(EntryId id) const = 0;
  virtual void erase(EntryId id) = 0;
  [[nodiscard]] virtual bool contains(EntryId id) const = 0;
  /// Bytes of live blocks.
  [[nodiscard]] virtual std::uint64_t bytes() const = 0;
};

class MemoryTraceStore final : public TraceStore {
 public:
  void put(EntryId id, const ExperimentResult& result) override;
  [[nodiscard]] std::optional<ExperimentResult> get(EntryId id) const override;
  void erase(EntryId id) override;
  [[nodiscard]] bool contains(EntryId id) const override;
  [[nodiscard]] std::uint64_t bytes() const override;

 private:
  mutable std::mutex mu_;
  std::map<EntryId, std::pair<std::shared_ptr<const ExperimentResult>, std::size_t>> blocks_;
  std::uint64_t bytes_ = 0;
};

/// Append-only block file with an in-memory offset index. Erased blocks stay on disk
/// until compact().
class FileTraceStore final : public TraceStore {
 public:
  explicit FileTraceStore(std::filesystem::path path);

  void put(EntryId id, const ExperimentResult& result) override;
  [[nodiscard]] std::optional<ExperimentResult> get(EntryId id) const override;
  void erase(EntryId id) override;
  [[nodiscard]] bool contains(EntryId id) const override;
  [[nodiscard]] std::uint64_t bytes() const override;

  /// Rewrites the file with live blocks only.
  void compact();
  [[nodiscard]] std::uint64_t file_bytes() const;

 private:
  struct Slot {
    std::uint64_t offset;
    std::uint64_t size;
  };
  void load_index();

  std::filesystem::path path_;
  mutable std::mutex mu_;
  mutable std::fstream file_;
  std::map<EntryId, Slot> index_;
  std::uint64_t end_ = 0;
  std::uint64_t live_ = 0;
};

}  // namespace expreuse
