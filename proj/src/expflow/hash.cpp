#include "expflow/hash.hpp"

#include "expflow/error.hpp"

#include <algorithm>
#include <fstream>
#include <vector>

#include <openssl/evp.h>

namespace expflow {
namespace {

struct Digest {
    EVP_MD_CTX* ctx;
    Digest() : ctx(EVP_MD_CTX_new()) {
        if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1)
            throw Error(Errc::io_error, "sha256 init failed");
    }
    ~Digest() { EVP_MD_CTX_free(ctx); }
    void update(const void* data, size_t len) {
        if (EVP_DigestUpdate(ctx, data, len) != 1)
            throw Error(Errc::io_error, "sha256 update failed");
    }
    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx, md, &len) != 1)
            throw Error(Errc::io_error, "sha256 final failed");
        static const char* digits = "0123456789abcdef";
        std::string out;
        out.reserve(len * 2);
        for (unsigned int i = 0; i < len; ++i) {
            out += digits[md[i] >> 4];
            out += digits[md[i] & 0xf];
        }
        return out;
    }
};

} // namespace

std::string sha256_hex(std::string_view bytes) {
    Digest d;
    d.update(bytes.data(), bytes.size());
    return d.hex();
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::io_error, "cannot read " + path.string());
    Digest d;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof buf);
        std::streamsize got = in.gcount();
        if (got > 0) d.update(buf, static_cast<size_t>(got));
    }
    return d.hex();
}

std::string hash_tree(const std::filesystem::path& path) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::file_status st = fs::status(path, ec);
    if (ec || st.type() == fs::file_type::not_found)
        throw Error(Errc::not_found, "no such path: " + path.string());
    if (!fs::is_directory(st)) return sha256_file(path);

    std::vector<std::string> relpaths;
    for (auto it = fs::recursive_directory_iterator(
             path, fs::directory_options::follow_directory_symlink, ec);
         it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (ec) throw Error(Errc::io_error, "cannot walk " + path.string());
        if (it->is_directory()) continue;
        relpaths.push_back(fs::relative(it->path(), path).generic_string());
    }
    std::sort(relpaths.begin(), relpaths.end());

    Digest d;
    for (const auto& rel : relpaths) {
        std::string line = rel + "\t" + sha256_file(path / rel) + "\n";
        d.update(line.data(), line.size());
    }
    return d.hex();
}

} // namespace expflow
