#include <expreuse/trace_store.hpp>

#include <expreuse/error.hpp>

#include <bit>
#include <cstring>

namespace expreuse {

static_assert(std::endian::native == std::endian::little, "trace blocks are written little-endian");

namespace {

constexpr char kMagic[4] = {'E', 'X', 'T', 'R'};
/// Erase marker: magic, 4 padding bytes, id.
constexpr char kTombstoneMagic[4] = {'E', 'X', 'T', 'D'};
constexpr std::uint64_t kTombstoneSize = 16;
constexpr std::uint16_t kVersion = 1;

template <class T>
void put_raw(std::vector<char>& out, const T& v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
T get_raw(const char*& p, const char* end) {
  if (static_cast<std::size_t>(end - p) < sizeof(T)) throw Error(ErrorCode::IoError, "truncated trace block");
  T v;
  std::memcpy(&v, p, sizeof(T));
  p += sizeof(T);
  return v;
}

}  // namespace

std::size_t trace_block_size(const ExperimentResult& r) {
  std::size_t n = 4 + 2 + 2 + 8 + 8 + 8 + 4 + r.meta.spec_key.size() + 4;
  for (const auto& [name, t] : r.traces) n += 2 + name.size() + 8 + 16 * t.time.size();
  return n;
}

std::vector<char> encode_trace_block(EntryId id, const ExperimentResult& r) {
  std::vector<char> out;
  out.reserve(trace_block_size(r));
  out.insert(out.end(), kMagic, kMagic + 4);
  put_raw(out, kVersion);
  put_raw(out, static_cast<std::uint16_t>(r.traces_elided ? 1 : 0));
  put_raw(out, static_cast<std::uint64_t>(id));
  put_raw(out, r.meta.step);
  put_raw(out, r.meta.wall_time_s);
  put_raw(out, static_cast<std::uint32_t>(r.meta.spec_key.size()));
  out.insert(out.end(), r.meta.spec_key.begin(), r.meta.spec_key.end());
  put_raw(out, static_cast<std::uint32_t>(r.traces.size()));
  for (const auto& [name, t] : r.traces) {
    if (t.time.size() != t.value.size()) throw Error(ErrorCode::IoError, "ragged trace '" + name + "'");
    put_raw(out, static_cast<std::uint16_t>(name.size()));
    out.insert(out.end(), name.begin(), name.end());
    put_raw(out, static_cast<std::uint64_t>(t.time.size()));
    const auto* tp = reinterpret_cast<const char*>(t.time.data());
    out.insert(out.end(), tp, tp + 8 * t.time.size());
    const auto* vp = reinterpret_cast<const char*>(t.value.data());
    out.insert(out.end(), vp, vp + 8 * t.value.size());
  }
  return out;
}

ExperimentResult decode_trace_block(const char* data, std::size_t size, EntryId* id) {
  const char* p = data;
  const char* end = data + size;
  if (size < 4 || std::memcmp(p, kMagic, 4) != 0) throw Error(ErrorCode::IoError, "bad trace block magic");
  p += 4;
  if (get_raw<std::uint16_t>(p, end) != kVersion) throw Error(ErrorCode::IoError, "unsupported trace block version");
  ExperimentResult r;
  r.traces_elided = (get_raw<std::uint16_t>(p, end) & 1) != 0;
  const auto rid = get_raw<std::uint64_t>(p, end);
  if (id) *id = rid;
  r.meta.step = get_raw<double>(p, end);
  r.meta.wall_time_s = get_raw<double>(p, end);
  const auto klen = get_raw<std::uint32_t>(p, end);
  if (static_cast<std::size_t>(end - p) < klen) throw Error(ErrorCode::IoError, "truncated trace block");
  r.meta.spec_key.assign(p, klen);
  p += klen;
  const auto nsig = get_raw<std::uint32_t>(p, end);
  for (std::uint32_t s = 0; s < nsig; ++s) {
    const auto nlen = get_raw<std::uint16_t>(p, end);
    if (static_cast<std::size_t>(end - p) < nlen) throw Error(ErrorCode::IoError, "truncated trace block");
    std::string name(p, nlen);
    p += nlen;
    const auto n = get_raw<std::uint64_t>(p, end);
    if (static_cast<std::uint64_t>(end - p) < 16 * n) throw Error(ErrorCode::IoError, "truncated trace block");
    Trace t;
    t.time.resize(n);
    t.value.resize(n);
    std::memcpy(t.time.data(), p, 8 * n);
    p += 8 * n;
    std::memcpy(t.value.data(), p, 8 * n);
    p += 8 * n;
    r.traces.emplace(std::move(name), std::move(t));
  }
  return r;
}

// --- memory -----------------------------------------------------------------

void MemoryTraceStore::put(EntryId id, const ExperimentResult& result) {
  const std::size_t n = trace_block_size(result);
  std::lock_guard lock(mu_);
  auto [it, fresh] = blocks_.try_emplace(id);
  if (!fresh) bytes_ -= it->second.second;
  it->second = {std::make_shared<const ExperimentResult>(result), n};
  bytes_ += n;
}

std::optional<ExperimentResult> MemoryTraceStore::get(EntryId id) const {
  std::lock_guard lock(mu_);
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return std::nullopt;
  return *it->second.first;
}

void MemoryTraceStore::erase(EntryId id) {
  std::lock_guard lock(mu_);
  auto it = blocks_.find(id);
  if (it == blocks_.end()) return;
  bytes_ -= it->second.second;
  blocks_.erase(it);
}

bool MemoryTraceStore::contains(EntryId id) const {
  std::lock_guard lock(mu_);
  return blocks_.count(id) > 0;
}

std::uint64_t MemoryTraceStore::bytes() const {
  std::lock_guard lock(mu_);
  return bytes_;
}

// --- file -------------------------------------------------------------------

FileTraceStore::FileTraceStore(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (!std::filesystem::exists(path_)) std::ofstream(path_, std::ios::binary).flush();
  file_.open(path_, std::ios::in | std::ios::out | std::ios::binary);
  if (!file_) throw Error(ErrorCode::IoError, "cannot open trace file '" + path_.string() + "'");
  load_index();
}

void FileTraceStore::load_index() {
  file_.seekg(0, std::ios::end);
  const auto size = static_cast<std::uint64_t>(file_.tellg());
  std::uint64_t off = 0;
  while (off + 8 <= size) {
    std::uint64_t len = 0;
    file_.seekg(static_cast<std::streamoff>(off));
    file_.read(reinterpret_cast<char*>(&len), 8);
    if (!file_ || off + 8 + len > size || (len < 24 && len != kTombstoneSize)) break;  // torn tail
    std::vector<char> head(len == kTombstoneSize ? kTombstoneSize : 24);
    file_.read(head.data(), static_cast<std::streamsize>(head.size()));
    EntryId id = 0;
    std::memcpy(&id, head.data() + 8, 8);
    auto it = index_.find(id);
    if (it != index_.end()) live_ -= it->second.size;
    if (len == kTombstoneSize) {
      if (std::memcmp(head.data(), kTombstoneMagic, 4) != 0) break;
      index_.erase(id);
    } else {
      index_[id] = {off + 8, len};
      live_ += len;
    }
    off += 8 + len;
  }
  file_.clear();
  end_ = off;
}

void FileTraceStore::put(EntryId id, const ExperimentResult& result) {
  const auto block = encode_trace_block(id, result);
  std::lock_guard lock(mu_);
  const std::uint64_t len = block.size();
  file_.seekp(static_cast<std::streamoff>(end_));
  file_.write(reinterpret_cast<const char*>(&len), 8);
  file_.write(block.data(), static_cast<std::streamsize>(len));
  file_.flush();
  if (!file_) throw Error(ErrorCode::IoError, "write to trace file failed");
  auto it = index_.find(id);
  if (it != index_.end()) live_ -= it->second.size;
  index_[id] = {end_ + 8, len};
  live_ += len;
  end_ += 8 + len;
}

std::optional<ExperimentResult> FileTraceStore::get(EntryId id) const {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  std::vector<char> buf(it->second.size);
  file_.seekg(static_cast<std::streamoff>(it->second.offset));
  file_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!file_) {
    file_.clear();
    throw Error(ErrorCode::IoError, "read from trace file failed");
  }
  return decode_trace_block(buf.data(), buf.size());
}

void FileTraceStore::erase(EntryId id) {
  std::lock_guard lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) return;
  char rec[8 + kTombstoneSize] = {};
  const std::uint64_t len = kTombstoneSize;
  std::memcpy(rec, &len, 8);
  std::memcpy(rec + 8, kTombstoneMagic, 4);
  std::memcpy(rec + 16, &id, 8);
  file_.seekp(static_cast<std::streamoff>(end_));
  file_.write(rec, sizeof rec);
  file_.flush();
  if (!file_) throw Error(ErrorCode::IoError, "write to trace file failed");
  end_ += sizeof rec;
  live_ -= it->second.size;
  index_.erase(it);
}

bool FileTraceStore::contains(EntryId id) const {
  std::lock_guard lock(mu_);
  return index_.count(id) > 0;
}

std::uint64_t FileTraceStore::bytes() const {
  std::lock_guard lock(mu_);
  return live_;
}

std::uint64_t FileTraceStore::file_bytes() const {
  std::lock_guard lock(mu_);
  return end_;
}

void FileTraceStore::compact() {
  std::lock_guard lock(mu_);
  auto tmp = path_;
  tmp += ".compact";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    std::map<EntryId, Slot> fresh;
    std::uint64_t off = 0;
    for (const auto& [id, slot] : index_) {
      std::vector<char> buf(slot.size);
      file_.seekg(static_cast<std::streamoff>(slot.offset));
      file_.read(buf.data(), static_cast<std::streamsize>(buf.size()));
      out.write(reinterpret_cast<const char*>(&slot.size), 8);
      out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
      fresh[id] = {off + 8, slot.size};
      off += 8 + slot.size;
    }
    if (!out) throw Error(ErrorCode::IoError, "trace compaction failed");
    index_ = std::move(fresh);
    end_ = off;
  }
  file_.close();
  std::filesystem::rename(tmp, path_);
  file_.open(path_, std::ios::in | std::ios::out | std::ios::binary);
  if (!file_) throw Error(ErrorCode::IoError, "cannot reopen trace file after compaction");
}

}  // namespace expreuse
