#include "pmon/store/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstring>

#include <fmt/format.h>

namespace pmon::store {

namespace {

constexpr char kMagic[8] = {'P', 'M', 'O', 'N', 'S', 'T', 'O', 'R'};
constexpr std::uint8_t kTypeSample = 1;
constexpr std::uint8_t kTypeGap = 2;
constexpr std::size_t kRecordHeader = 8;
constexpr std::uint32_t kMaxPayload = 4096;

void put_le(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes)
{
    for (int i = 0; i < bytes; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const std::uint8_t* p, int bytes)
{
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint32_t checksum(const std::uint8_t* data, std::size_t size)
{
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(size)));
}

StoreError io_error(const std::string& what)
{
    const auto kind = errno == ENOSPC || errno == EDQUOT ? StoreError::Kind::StorageFull : StoreError::Kind::Io;
    return StoreError(kind, what + ": " + std::strerror(errno));
}

struct Cursor {
    const std::uint8_t* p;
    std::size_t left;

    bool take(std::size_t n, const std::uint8_t*& out)
    {
        if (left < n)
            return false;
        out = p;
        p += n;
        left -= n;
        return true;
    }
};

std::optional<StoredRow> decode_payload(const std::uint8_t* data, std::size_t size)
{
    Cursor c{data, size};
    const std::uint8_t* f;
    if (!c.take(2, f))
        return std::nullopt;
    const std::uint8_t type = f[0];
    const std::size_t name_len = f[1];
    const std::uint8_t* name;
    if (name_len == 0 || !c.take(name_len, name) || !c.take(16, f))
        return std::nullopt;
    StoredRow row;
    row.id = get_le(f, 8);
    const auto ts = from_millis(static_cast<std::int64_t>(get_le(f + 8, 8)));
    std::string device(reinterpret_cast<const char*>(name), name_len);
    if (type == kTypeSample) {
        if (!c.take(4 * kMeasurementCount, f))
            return std::nullopt;
        Sample s{std::move(device), ts, {}};
        for (std::size_t i = 0; i < kMeasurementCount; ++i)
            s.values.set(kAllKinds[i], std::bit_cast<float>(static_cast<std::uint32_t>(get_le(f + 4 * i, 4))));
        row.reading = std::move(s);
    } else if (type == kTypeGap) {
        if (!c.take(2, f) || f[0] < 1 || f[0] > 3)
            return std::nullopt;
        row.reading = GapEvent{std::move(device), ts, static_cast<GapReason>(f[0]), f[1]};
    } else {
        return std::nullopt;
    }
    if (c.left != 0)
        return std::nullopt;
    return row;
}

const std::string& device_of(const Reading& r)
{
    return std::visit([](const auto& v) -> const std::string& { return v.device; }, r);
}

} // namespace

TimePoint StoredRow::ts() const
{
    return std::visit([](const auto& v) { return v.ts; }, reading);
}

const std::string& StoredRow::device() const
{
    return device_of(reading);
}

std::vector<std::uint8_t> encode_record(std::uint64_t id, const Reading& reading)
{
    const auto& device = device_of(reading);
    if (device.empty() || device.size() > 255)
        throw std::invalid_argument(fmt::format("device name '{}' must be 1..255 bytes", device));
    std::vector<std::uint8_t> payload;
    const bool sample = std::holds_alternative<Sample>(reading);
    payload.push_back(sample ? kTypeSample : kTypeGap);
    payload.push_back(static_cast<std::uint8_t>(device.size()));
    payload.insert(payload.end(), device.begin(), device.end());
    put_le(payload, id, 8);
    const auto ts = std::visit([](const auto& v) { return v.ts; }, reading);
    put_le(payload, static_cast<std::uint64_t>(to_millis(ts)), 8);
    if (sample) {
        const auto& values = std::get<Sample>(reading).values;
        for (auto kind : kAllKinds)
            put_le(payload, std::bit_cast<std::uint32_t>(values.get(kind)), 4);
    } else {
        const auto& gap = std::get<GapEvent>(reading);
        payload.push_back(static_cast<std::uint8_t>(gap.reason));
        payload.push_back(gap.exception_code);
    }
    std::vector<std::uint8_t> record;
    record.reserve(kRecordHeader + payload.size());
    put_le(record, payload.size(), 4);
    put_le(record, checksum(payload.data(), payload.size()), 4);
    record.insert(record.end(), payload.begin(), payload.end());
    return record;
}

Store::Store(const std::filesystem::path& path, Mode mode) : path_(path), mode_(mode)
{
    const int flags = mode == Mode::ReadWrite ? (O_RDWR | O_CREAT | O_CLOEXEC) : (O_RDONLY | O_CLOEXEC);
    fd_ = ::open(path.c_str(), flags, 0644);
    if (fd_ < 0)
        throw io_error("open " + path.string());
    if (mode == Mode::ReadWrite && ::flock(fd_, LOCK_EX | LOCK_NB) < 0) {
        ::close(fd_);
        fd_ = -1;
        throw StoreError(StoreError::Kind::Locked, path.string() + " is already open for writing");
    }

    struct stat st{};
    ::fstat(fd_, &st);
    std::uint8_t header[kHeaderSize] = {};
    const auto got = ::pread(fd_, header, kHeaderSize, 0);
    if (got == static_cast<ssize_t>(kHeaderSize)) {
        if (std::memcmp(header, kMagic, sizeof kMagic) != 0) {
            ::close(fd_);
            fd_ = -1;
            throw StoreError(StoreError::Kind::BadFormat, path.string() + " is not a pmon store");
        }
        if (get_le(header + 8, 4) != kVersion) {
            ::close(fd_);
            fd_ = -1;
            throw StoreError(StoreError::Kind::BadFormat,
                             fmt::format("{}: unsupported store version {}", path.string(), get_le(header + 8, 4)));
        }
        end_ = kHeaderSize;
        scan_from(kHeaderSize, mode == Mode::ReadWrite);
        return;
    }
    // Missing or torn header: nothing was ever committed.
    if (mode == Mode::ReadWrite) {
        std::vector<std::uint8_t> fresh(kMagic, kMagic + sizeof kMagic);
        put_le(fresh, kVersion, 4);
        put_le(fresh, 0, 4);
        if (::ftruncate(fd_, 0) < 0 || ::pwrite(fd_, fresh.data(), fresh.size(), 0) != ssize_t(fresh.size()) ||
            ::fsync(fd_) < 0) {
            auto err = io_error("initialise " + path.string());
            ::close(fd_);
            fd_ = -1;
            throw err;
        }
        end_ = kHeaderSize;
    }
}

Store::~Store()
{
    if (fd_ >= 0)
        ::close(fd_);
}

void Store::scan_from(std::uint64_t offset, bool truncate_tail)
{
    struct stat st{};
    if (::fstat(fd_, &st) < 0)
        throw io_error("stat " + path_.string());
    const auto size = static_cast<std::uint64_t>(st.st_size);
    if (size <= offset)
        return;
    std::vector<std::uint8_t> buf(size - offset);
    std::size_t have = 0;
    while (have < buf.size()) {
        const auto n = ::pread(fd_, buf.data() + have, buf.size() - have, static_cast<off_t>(offset + have));
        if (n < 0)
            throw io_error("read " + path_.string());
        if (n == 0)
            break;
        have += static_cast<std::size_t>(n);
    }
    buf.resize(have);

    std::map<std::string, std::vector<StoredRow>> fresh;
    std::size_t at = 0;
    {
        std::shared_lock lock(index_mutex_);
        while (at + kRecordHeader <= buf.size()) {
            const auto len = static_cast<std::uint32_t>(get_le(&buf[at], 4));
            const auto sum = static_cast<std::uint32_t>(get_le(&buf[at + 4], 4));
            if (len == 0 || len > kMaxPayload || at + kRecordHeader + len > buf.size())
                break;
            const auto* payload = &buf[at + kRecordHeader];
            if (checksum(payload, len) != sum)
                break;
            auto row = decode_payload(payload, len);
            if (!row)
                break;
            auto& pending = fresh[row->device()];
            std::uint64_t prev_id = 0;
            TimePoint prev_ts = TimePoint::min();
            if (!pending.empty()) {
                prev_id = pending.back().id;
                prev_ts = pending.back().ts();
            } else if (auto it = index_.find(row->device()); it != index_.end() && !it->second.empty()) {
                prev_id = it->second.back().id;
                prev_ts = it->second.back().ts();
            }
            if (row->id != prev_id + 1 || row->ts() < prev_ts)
                break;
            pending.push_back(std::move(*row));
            at += kRecordHeader + len;
        }
    }
    {
        std::unique_lock lock(index_mutex_);
        for (auto& [device, rows] : fresh) {
            auto& dst = index_[device];
            dst.insert(dst.end(), std::make_move_iterator(rows.begin()), std::make_move_iterator(rows.end()));
        }
        end_ = offset + at;
    }
    if (truncate_tail && end_ < size) {
        if (::ftruncate(fd_, static_cast<off_t>(end_)) < 0 || ::fsync(fd_) < 0)
            throw io_error("truncate torn tail of " + path_.string());
    }
}

void Store::refresh()
{
    if (mode_ == Mode::ReadWrite)
        return; // the writer's index is always current
    std::lock_guard lock(append_mutex_);
    std::uint64_t from;
    {
        std::shared_lock index_lock(index_mutex_);
        from = end_;
    }
    if (from == 0) {
        // The header may have appeared since we opened.
        std::uint8_t header[kHeaderSize];
        if (::pread(fd_, header, kHeaderSize, 0) != static_cast<ssize_t>(kHeaderSize) ||
            std::memcmp(header, kMagic, sizeof kMagic) != 0)
            return;
        from = kHeaderSize;
        std::unique_lock index_lock(index_mutex_);
        end_ = kHeaderSize;
    }
    scan_from(from, false);
}

std::uint64_t Store::append(const Sample& sample)
{
    return append_record(sample);
}

std::uint64_t Store::append(const GapEvent& gap)
{
    return append_record(gap);
}

std::uint64_t Store::append(const Reading& reading)
{
    return append_record(reading);
}

std::uint64_t Store::append_record(const Reading& reading)
{
    if (mode_ != Mode::ReadWrite)
        throw StoreError(StoreError::Kind::ReadOnly, path_.string() + " opened read-only");
    std::lock_guard lock(append_mutex_);

    const auto& device = device_of(reading);
    const auto ts = std::visit([](const auto& v) { return v.ts; }, reading);
    std::uint64_t id = 1;
    std::uint64_t offset;
    {
        std::shared_lock index_lock(index_mutex_);
        if (auto it = index_.find(device); it != index_.end() && !it->second.empty()) {
            if (ts < it->second.back().ts())
                throw std::invalid_argument(fmt::format("{}: timestamp goes backwards", device));
            id = it->second.back().id + 1;
        }
        offset = end_;
    }
    const auto record = encode_record(id, reading);

    std::size_t written = 0;
    while (written < record.size()) {
        const auto n = ::pwrite(fd_, record.data() + written, record.size() - written,
                                static_cast<off_t>(offset + written));
        if (n < 0) {
            if (errno == EINTR)
                continue;
            auto err = io_error("append to " + path_.string());
            [[maybe_unused]] auto rc = ::ftruncate(fd_, static_cast<off_t>(offset));
            throw err;
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd_) < 0) {
        auto err = io_error("sync " + path_.string());
        [[maybe_unused]] auto rc = ::ftruncate(fd_, static_cast<off_t>(offset));
        throw err;
    }

    std::unique_lock index_lock(index_mutex_);
    index_[device].push_back(StoredRow{id, reading});
    end_ = offset + record.size();
    return id;
}

const std::vector<StoredRow>& Store::rows_of(const std::string& device) const
{
    auto it = index_.find(device);
    if (it == index_.end())
        throw StoreError(StoreError::Kind::UnknownDevice, "no rows for device '" + device + "'");
    return it->second;
}

std::optional<StoredRow> Store::query_latest(const std::string& device) const
{
    std::shared_lock lock(index_mutex_);
    const auto& rows = rows_of(device);
    for (auto it = rows.rbegin(); it != rows.rend(); ++it)
        if (it->is_sample())
            return *it;
    return std::nullopt;
}

RangeResult Store::query_range(const std::string& device, TimePoint from, TimePoint to, std::size_t limit,
                               RowFilter filter) const
{
    if (from > to)
        throw StoreError(StoreError::Kind::InvalidRange, "range start is after its end");
    if (limit < 1)
        throw StoreError(StoreError::Kind::InvalidRange, "limit must be at least 1");
    std::shared_lock lock(index_mutex_);
    const auto& rows = rows_of(device);
    // ts is non-decreasing in id order, so the index is already sorted by ts.
    auto first = std::lower_bound(rows.begin(), rows.end(), from,
                                  [](const StoredRow& r, TimePoint t) { return r.ts() < t; });
    RangeResult result;
    for (auto it = first; it != rows.end() && it->ts() <= to; ++it) {
        if (filter == RowFilter::SamplesOnly && !it->is_sample())
            continue;
        if (result.rows.size() == limit) {
            result.truncated = true;
            break;
        }
        result.rows.push_back(*it);
    }
    return result;
}

std::vector<StoredRow> Store::rows(const std::string& device) const
{
    std::shared_lock lock(index_mutex_);
    return rows_of(device);
}

bool Store::has_device(const std::string& device) const
{
    std::shared_lock lock(index_mutex_);
    return index_.count(device) != 0;
}

std::vector<std::string> Store::devices() const
{
    std::shared_lock lock(index_mutex_);
    std::vector<std::string> out;
    for (const auto& [name, rows] : index_)
        out.push_back(name);
    return out;
}

std::optional<TimePoint> Store::last_sample_ts(const std::string& device) const
{
    std::shared_lock lock(index_mutex_);
    auto it = index_.find(device);
    if (it == index_.end())
        return std::nullopt;
    for (auto r = it->second.rbegin(); r != it->second.rend(); ++r)
        if (r->is_sample())
            return r->ts();
    return std::nullopt;
}

std::uint64_t Store::valid_size() const
{
    std::shared_lock lock(index_mutex_);
    return end_;
}

} // namespace pmon::store
