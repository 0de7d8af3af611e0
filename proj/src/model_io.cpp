#include "har/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string_view>

#include <boost/crc.hpp>

namespace har {

namespace {

constexpr std::string_view kMagic = "HARMODEL";


class Writer {
public:
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void size(std::size_t v) {
        if (v > 0xFFFFFFFFu) throw ModelFormatError("value too large for model container");
        u32(static_cast<std::uint32_t>(v));
    }
    std::vector<std::uint8_t>& buffer() { return buf_; }

private:
    std::vector<std::uint8_t> buf_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size) : p_(data), end_(data + size) {}

    void need(std::size_t n) const {
        if (static_cast<std::size_t>(end_ - p_) < n) throw ModelFormatError("model file truncated");
    }
    std::uint8_t u8() {
        need(1);
        return *p_++;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(*p_++) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(*p_++) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p_), n);
        p_ += n;
        return s;
    }
    bool done() const { return p_ == end_; }

private:
    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

std::uint32_t crc32(const std::uint8_t* data, std::size_t n) {
    boost::crc_32_type crc;
    crc.process_bytes(data, n);
    return crc.checksum();
}

}  // namespace

std::vector<std::uint8_t> serialize_model(const TrainedModel& model) {
    const auto& c = model.config;
    Writer w;
    w.bytes(kMagic.data(), kMagic.size());
    w.u32(kModelFormatVersion);

    w.u8(static_cast<std::uint8_t>(c.arch));
    w.size(c.input_time);
    w.size(c.input_channels);
    w.size(c.conv_depth);
    w.size(c.filters_per_layer);
    w.size(c.kernel_time);
    w.size(c.pool_time);
    w.f64(c.dropout_prob);
    w.f64(c.learning_rate);
    w.size(c.epochs);
    w.size(c.batch_size);
    w.size(c.lstm_hidden.value_or(0));
    w.u64(c.seed);

    w.size(model.column_subset.size());
    for (auto col : model.column_subset) w.size(col);

    w.u8(model.input_stats ? 1 : 0);
    if (model.input_stats) {
        w.size(model.input_stats->mean.size());
        for (double v : model.input_stats->mean) w.f64(v);
        for (double v : model.input_stats->stddev) w.f64(v);
    }

    w.size(model.history.size());
    for (const auto& e : model.history) {
        w.f64(e.loss);
        w.f64(e.accuracy);
    }

    const auto tensors = model.network.state_dict();
    w.size(tensors.size());
    for (const auto& [name, t] : tensors) {
        w.size(name.size());
        w.bytes(name.data(), name.size());
        w.size(t.rank());
        for (auto d : t.shape()) w.size(d);
        for (double v : t.data()) w.f64(v);
    }

    auto& buf = w.buffer();
    const std::uint32_t crc = crc32(buf.data(), buf.size());
    w.u32(crc);
    return std::move(buf);
}

TrainedModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < kMagic.size() + 8) throw ModelFormatError("model file truncated");
    if (std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
        throw ModelFormatError("not a model file (bad magic)");
    }
    Reader header(bytes.data() + kMagic.size(), 4);
    const std::uint32_t version = header.u32();
    if (version != kModelFormatVersion) {
        throw ModelFormatError("unsupported model format version " + std::to_string(version) +
                               " (expected " + std::to_string(kModelFormatVersion) + ")");
    }
    const std::size_t body = bytes.size() - 4;
    Reader tail(bytes.data() + body, 4);
    if (tail.u32() != crc32(bytes.data(), body)) throw ModelFormatError("model checksum mismatch");

    Reader r(bytes.data() + kMagic.size() + 4, body - kMagic.size() - 4);
    TrainedModel m;
    auto& c = m.config;
    const std::uint8_t arch = r.u8();
    if (arch > 1) throw ModelFormatError("unknown architecture tag");
    c.arch = static_cast<Architecture>(arch);
    c.input_time = r.u32();
    c.input_channels = r.u32();
    c.conv_depth = r.u32();
    c.filters_per_layer = r.u32();
    c.kernel_time = r.u32();
    c.pool_time = r.u32();
    c.dropout_prob = r.f64();
    c.learning_rate = r.f64();
    c.epochs = r.u32();
    c.batch_size = r.u32();
    if (const auto hidden = r.u32(); hidden != 0) c.lstm_hidden = hidden;
    c.seed = r.u64();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(std::string("invalid stored config: ") + e.what());
    }

    const std::uint32_t subset_size = r.u32();
    if (subset_size > kChannelCount) throw ModelFormatError("column subset too large");
    for (std::uint32_t i = 0; i < subset_size; ++i) m.column_subset.push_back(r.u32());

    if (r.u8()) {
        const std::uint32_t width = r.u32();
        if (width > kChannelCount) throw ModelFormatError("stats width too large");
        ChannelStats stats{std::vector<double>(width), std::vector<double>(width)};
        for (auto& v : stats.mean) v = r.f64();
        for (auto& v : stats.stddev) v = r.f64();
        m.input_stats = std::move(stats);
    }

    const std::uint32_t epochs = r.u32();
    r.need(static_cast<std::size_t>(epochs) * 16);
    for (std::uint32_t i = 0; i < epochs; ++i) {
        EpochStats e;
        e.loss = r.f64();
        e.accuracy = r.f64();
        m.history.push_back(e);
    }

    std::map<std::string, Tensor> tensors;
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw ModelFormatError("tensor " + name + ": bad rank");
        Shape shape;
        for (std::uint32_t d = 0; d < rank; ++d) shape.push_back(r.u32());
        const std::size_t n = shape_size(shape);
        r.need(n * 8);
        std::vector<double> data(n);
        for (auto& v : data) v = r.f64();
        try {
            tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
        } catch (const std::invalid_argument& e) {
            throw ModelFormatError(e.what());
        }
    }
    if (!r.done()) throw ModelFormatError("trailing bytes before checksum");

    try {
        validate_columns(m.column_subset);
        if (m.column_subset.size() != c.input_channels) {
            throw std::invalid_argument("column subset does not match input_channels");
        }
        m.network = build_network(c);
        m.network.load_state_dict(tensors);
    } catch (const std::invalid_argument& e) {
        throw ModelFormatError(e.what());
    }
    return m;
}

void save_model(const TrainedModel& model, const std::filesystem::path& path) {
    const auto bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelFormatError(path.string() + ": cannot open for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ModelFormatError(path.string() + ": write failed");
}

TrainedModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelFormatError(path.string() + ": cannot open model file");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes);
}

}  // namespace har
