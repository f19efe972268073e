#pragma once

#include "pmon/sample.hpp"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <vector>

namespace pmon::store {

class StoreError : public std::runtime_error {
public:
    enum class Kind { Io, StorageFull, Locked, BadFormat, ReadOnly, UnknownDevice, InvalidRange };
    StoreError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

struct StoredRow {
    std::uint64_t id = 0; // 1, 2, 3, ... per device
    Reading reading;

    bool is_sample() const { return std::holds_alternative<Sample>(reading); }
    const Sample& sample() const { return std::get<Sample>(reading); }
    const GapEvent& gap() const { return std::get<GapEvent>(reading); }
    TimePoint ts() const;
    const std::string& device() const;
    friend bool operator==(const StoredRow&, const StoredRow&) = default;
};

enum class RowFilter { All, SamplesOnly };

struct RangeResult {
    std::vector<StoredRow> rows;
    bool truncated = false;
};

// Append-only single-file store. Layout (little-endian):
//
//   header  "PMONSTOR" u32 version u32 reserved
//   record  u32 payload_len | u32 crc32(payload) | payload
//   payload u8 type (1 sample, 2 gap) | u8 name_len | name | u64 id | i64 ts_ms
//           sample: 6 x u32 binary32 bits in register-map order
//           gap:    u8 reason | u8 exception_code
//
// Opening scans every record and rebuilds the per-device index; the first
// record that is short, fails its checksum, or breaks id continuity ends the
// log. A writer truncates that torn tail away before appending.
class Store {
public:
    enum class Mode { ReadWrite, ReadOnly };

    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::size_t kHeaderSize = 16;

    // ReadWrite creates the file if needed and holds an exclusive lock on
    // it; a second writer gets StoreError(Locked).
    Store(const std::filesystem::path& path, Mode mode);
    ~Store();
    Store(const Store&) = delete;
    Store& operator=(const Store&) = delete;

    // Durable (fdatasync) before returning. Safe to call from several threads.
    std::uint64_t append(const Sample& sample);
    std::uint64_t append(const GapEvent& gap);
    std::uint64_t append(const Reading& reading);

    // Picks up records another handle appended since the last scan.
    void refresh();

    // Highest-id Sample of the device; GapEvents are skipped.
    std::optional<StoredRow> query_latest(const std::string& device) const;
    RangeResult query_range(const std::string& device, TimePoint from, TimePoint to, std::size_t limit,
                            RowFilter filter = RowFilter::All) const;
    std::vector<StoredRow> rows(const std::string& device) const;

    bool has_device(const std::string& device) const;
    std::vector<std::string> devices() const;
    std::optional<TimePoint> last_sample_ts(const std::string& device) const;

    const std::filesystem::path& path() const { return path_; }
    Mode mode() const { return mode_; }
    // Offset just past the last intact record.
    std::uint64_t valid_size() const;

private:
    std::uint64_t append_record(const Reading& reading);
    void scan_from(std::uint64_t offset, bool truncate_tail);
    const std::vector<StoredRow>& rows_of(const std::string& device) const;

    std::filesystem::path path_;
    Mode mode_;
    int fd_ = -1;

    mutable std::shared_mutex index_mutex_;
    std::mutex append_mutex_;
    std::map<std::string, std::vector<StoredRow>> index_;
    std::uint64_t end_ = 0;
};

// Payload encoding, exposed for format tests.
std::vector<std::uint8_t> encode_record(std::uint64_t id, const Reading& reading);

} // namespace pmon::store
