#include "percamp/container.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "percamp/error.hpp"

namespace percamp {

namespace {

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u32(std::uint32_t(s.size()));
        buf.append(s);
    }
    std::string buf;
};

class Reader {
public:
    explicit Reader(std::string data) : d_(std::move(data)) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(std::uint8_t(d_[p_ + i])) << (8 * i);
        p_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(std::uint8_t(d_[p_ + i])) << (8 * i);
        p_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint32_t n = u32();
        need(n);
        std::string s = d_.substr(p_, n);
        p_ += n;
        return s;
    }
    std::string raw(std::size_t n) {
        need(n);
        std::string s = d_.substr(p_, n);
        p_ += n;
        return s;
    }
    bool done() const { return p_ == d_.size(); }

private:
    void need(std::size_t n) const {
        if (p_ + n > d_.size()) throw ValidationError("container: truncated file");
    }
    std::string d_;
    std::size_t p_ = 0;
};

}  // namespace

void Container::add(std::string name, std::vector<double> data) {
    arrays.emplace_back(std::move(name), std::move(data));
}

const std::vector<double>& Container::array(const std::string& name) const {
    for (const auto& [n, v] : arrays)
        if (n == name) return v;
    throw ValidationError("container: missing array '" + name + "'");
}

bool Container::has(const std::string& name) const {
    for (const auto& a : arrays)
        if (a.first == name) return true;
    return false;
}

void write_container(const Container& c, const std::string& path) {
    Writer w;
    w.buf.append(container_magic, sizeof container_magic);
    w.u32(container_version);
    w.u64(c.params_hash);
    w.str(c.kind);
    w.f64(c.x_min);
    w.f64(c.x_max);
    w.u64(c.nx);
    w.u64(c.t_nodes.size());
    for (double t : c.t_nodes) w.f64(t);
    w.str(c.meta);
    w.u32(std::uint32_t(c.arrays.size()));
    for (const auto& [name, data] : c.arrays) {
        w.str(name);
        w.u64(data.size());
        for (double v : data) w.f64(v);
    }
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("container: cannot write " + path);
        out.write(w.buf.data(), std::streamsize(w.buf.size()));
        if (!out) throw std::runtime_error("container: write failed for " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("container: cannot move into place " + path);
}

Container read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("container: cannot open " + path);
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    Reader r(std::move(data));
    if (r.raw(sizeof container_magic) != std::string(container_magic, sizeof container_magic))
        throw ValidationError("container: bad magic in " + path);
    const std::uint32_t version = r.u32();
    if (version != container_version)
        throw ValidationError("container: unsupported format version " + std::to_string(version));
    Container c;
    c.params_hash = r.u64();
    c.kind = r.str();
    c.x_min = r.f64();
    c.x_max = r.f64();
    c.nx = r.u64();
    const std::uint64_t nt = r.u64();
    c.t_nodes.resize(nt);
    for (auto& t : c.t_nodes) t = r.f64();
    c.meta = r.str();
    const std::uint32_t na = r.u32();
    for (std::uint32_t i = 0; i < na; ++i) {
        std::string name = r.str();
        const std::uint64_t n = r.u64();
        std::vector<double> v(n);
        for (auto& x : v) x = r.f64();
        c.arrays.emplace_back(std::move(name), std::move(v));
    }
    if (!r.done()) throw ValidationError("container: trailing bytes in " + path);
    return c;
}

void Hasher::bytes(const unsigned char* p, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        h_ ^= p[i];
        h_ *= 1099511628211ull;
    }
}

Hasher& Hasher::add(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
    bytes(b, 8);
    return *this;
}

Hasher& Hasher::add(double v) { return add(std::bit_cast<std::uint64_t>(v)); }

Hasher& Hasher::add(const std::string& s) {
    add(std::uint64_t(s.size()));
    bytes(reinterpret_cast<const unsigned char*>(s.data()), s.size());
    return *this;
}

Hasher& Hasher::add(const std::vector<double>& v) {
    add(std::uint64_t(v.size()));
    for (double x : v) add(x);
    return *this;
}

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace percamp
