#include "ste/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace ste {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'E', 'C'};

constexpr std::uint16_t kFlagOpt = 1 << 0;
constexpr std::uint16_t kFlagRng = 1 << 1;
constexpr std::uint16_t kFlagNorm = 1 << 2;

class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void u8(std::uint8_t v) { raw(&v, 1); }
    void u16(std::uint16_t v) {
        std::uint8_t b[2] = {std::uint8_t(v), std::uint8_t(v >> 8)};
        raw(b, 2);
    }
    void u64(std::uint64_t v) {
        std::uint8_t b[8];
        for (int i = 0; i < 8; ++i) b[i] = std::uint8_t(v >> (8 * i));
        raw(b, 8);
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void f64s(const double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) f64(p[i]);
    }

private:
    void raw(const void* p, std::size_t n) {
        out_.write(static_cast<const char*>(p),
                   static_cast<std::streamsize>(n));
    }
    std::ostream& out_;
};

class Reader {
public:
    explicit Reader(std::istream& in, std::string name)
        : in_(in), name_(std::move(name)) {}

    std::uint8_t u8() {
        std::uint8_t v;
        raw(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        raw(b, 2);
        return std::uint16_t(b[0]) | (std::uint16_t(b[1]) << 8);
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        raw(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    void f64s(double* p, std::size_t n) {
        for (std::size_t i = 0; i < n; ++i) p[i] = f64();
    }

    void raw(void* p, std::size_t n) {
        if (!in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n)))
            throw DataError("checkpoint " + name_ +
                            " is truncated (unexpected end of file)");
    }

private:
    std::istream& in_;
    std::string name_;
};

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + path.string());
    Writer w(out);

    out.write(kMagic, 4);
    w.u16(kCheckpointVersion);
    std::uint16_t flags = 0;
    if (ck.opt) flags |= kFlagOpt;
    if (!ck.rng_streams.empty()) flags |= kFlagRng;
    if (ck.norm) flags |= kFlagNorm;
    w.u16(flags);

    w.u64(ck.model.layers.size());
    for (const Layer& layer : ck.model.layers) {
        if (const auto* d = std::get_if<DenseLayer>(&layer)) {
            w.u8(0);
            w.u8(static_cast<std::uint8_t>(d->act));
            w.u8(0);
            w.u8(d->output_dropout ? 1 : 0);
            w.u64(d->in_dim());
            w.u64(d->out_dim());
            w.u64(1);
            w.f64(1.0);
            w.f64(d->p_out);
            w.f64s(d->W.data.data(), d->W.data.size());
            w.f64s(d->b.data(), d->b.size());
        } else {
            const auto& s = std::get<STELayer>(layer);
            w.u8(1);
            w.u8(static_cast<std::uint8_t>(s.act));
            w.u8(s.noise == NoiseMode::Dropout ? 0 : 1);
            w.u8(s.output_dropout ? 1 : 0);
            w.u64(s.in_dim());
            w.u64(s.out_dim());
            w.u64(s.branches());
            w.f64(s.p);
            w.f64(s.p_out);
            for (std::size_t i = 0; i < s.branches(); ++i) {
                w.f64s(s.Ws[i].data.data(), s.Ws[i].data.size());
                w.f64s(s.bs[i].data(), s.bs[i].size());
            }
        }
    }

    if (ck.opt) {
        w.u64(ck.opt->iteration);
        w.u64(ck.opt->velocity.size());
        for (const Vector& v : ck.opt->velocity) {
            w.u64(v.size());
            w.f64s(v.data(), v.size());
        }
    }
    if (!ck.rng_streams.empty()) {
        w.u64(ck.rng_streams.size());
        for (const Rng& r : ck.rng_streams)
            for (std::uint64_t word : r.state()) w.u64(word);
    }
    if (ck.norm) {
        w.u64(ck.norm->mean.size());
        w.f64s(ck.norm->mean.data(), ck.norm->mean.size());
        w.f64s(ck.norm->std.data(), ck.norm->std.size());
    }

    w.u64(ck.epoch);
    w.f64(ck.val_loss);
    w.u64(ck.best_epoch);
    w.f64(ck.best_val_loss);

    if (!out) throw DataError("write error on checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint " + path.string());
    Reader r(in, path.string());

    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("bad checkpoint magic in " + path.string() +
                        " (expected \"STEC\")");
    const std::uint16_t version = r.u16();
    if (version != kCheckpointVersion)
        throw DataError("checkpoint version " + std::to_string(version) +
                        " unsupported (this build reads version " +
                        std::to_string(kCheckpointVersion) + ")");
    const std::uint16_t flags = r.u16();

    Checkpoint ck;
    const std::uint64_t n_layers = r.u64();
    std::size_t prev_out = 0;
    for (std::uint64_t l = 0; l < n_layers; ++l) {
        const std::uint8_t kind = r.u8();
        const auto act = static_cast<Activation>(r.u8());
        const std::uint8_t noise = r.u8();
        const bool output_dropout = r.u8() != 0;
        const std::uint64_t in_dim = r.u64();
        const std::uint64_t out_dim = r.u64();
        const std::uint64_t branches = r.u64();
        const double p = r.f64();
        const double p_out = r.f64();
        if (l > 0 && in_dim != prev_out)
            throw DataError("checkpoint layer " + std::to_string(l) +
                            " input dim " + std::to_string(in_dim) +
                            " does not chain with previous output " +
                            std::to_string(prev_out));
        if (l == 0) ck.model.input_dim = in_dim;
        prev_out = out_dim;

        if (kind == 0) {
            DenseLayer d;
            d.W = Matrix(out_dim, in_dim);
            d.b.assign(out_dim, 0.0);
            d.act = act;
            d.output_dropout = output_dropout;
            d.p_out = p_out;
            r.f64s(d.W.data.data(), d.W.data.size());
            r.f64s(d.b.data(), d.b.size());
            ck.model.layers.emplace_back(std::move(d));
        } else if (kind == 1) {
            STELayer s;
            s.p = p;
            s.noise = noise == 0 ? NoiseMode::Dropout : NoiseMode::Dropconnect;
            s.output_dropout = output_dropout;
            s.p_out = p_out;
            s.act = act;
            for (std::uint64_t i = 0; i < branches; ++i) {
                Matrix w(out_dim, in_dim);
                r.f64s(w.data.data(), w.data.size());
                Vector b(out_dim);
                r.f64s(b.data(), b.size());
                s.Ws.push_back(std::move(w));
                s.bs.push_back(std::move(b));
            }
            ck.model.layers.emplace_back(std::move(s));
        } else {
            throw DataError("checkpoint layer " + std::to_string(l) +
                            " has unknown kind " + std::to_string(kind));
        }
    }

    if (flags & kFlagOpt) {
        OptState st;
        st.iteration = r.u64();
        const std::uint64_t n_arrays = r.u64();
        st.velocity.resize(n_arrays);
        for (auto& v : st.velocity) {
            v.resize(r.u64());
            r.f64s(v.data(), v.size());
        }
        ck.opt = std::move(st);
    }
    if (flags & kFlagRng) {
        const std::uint64_t n_streams = r.u64();
        ck.rng_streams.resize(n_streams);
        for (Rng& rng : ck.rng_streams) {
            std::array<std::uint64_t, 4> st;
            for (auto& word : st) word = r.u64();
            rng.set_state(st);
        }
    }
    if (flags & kFlagNorm) {
        NormStats ns;
        const std::uint64_t m = r.u64();
        ns.mean.resize(m);
        r.f64s(ns.mean.data(), m);
        ns.std.resize(m);
        r.f64s(ns.std.data(), m);
        ck.norm = std::move(ns);
    }

    ck.epoch = r.u64();
    ck.val_loss = r.f64();
    ck.best_epoch = r.u64();
    ck.best_val_loss = r.f64();
    return ck;
}

} // namespace ste
