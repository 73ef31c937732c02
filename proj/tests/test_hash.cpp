#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expflow/error.hpp"
#include "expflow/hash.hpp"

#include <filesystem>
#include <fstream>

using namespace expflow;
namespace fs = std::filesystem;

// Digests pinned from the SHA-256 specification test vectors.
static const char* kEmptySha256 =
    "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
static const char* kAbcSha256 =
    "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / ("expflow-hash-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& content) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary | std::ios::trunc) << content;
}

} // namespace

TEST_CASE("sha256 of known vectors") {
    CHECK(sha256_hex("") == kEmptySha256);
    CHECK(sha256_hex("abc") == kAbcSha256);
}

TEST_CASE("hash_tree of a file hashes its raw bytes") {
    fs::path dir = fresh_dir("file");
    write(dir / "f", "abc");
    CHECK(hash_tree(dir / "f") == kAbcSha256);
}

TEST_CASE("hash_tree of the empty directory is the empty-input digest") {
    fs::path dir = fresh_dir("emptydir");
    CHECK(hash_tree(dir) == kEmptySha256);
}

TEST_CASE("directory digest equals digest of the sorted manifest") {
    fs::path dir = fresh_dir("manifest");
    write(dir / "b.txt", "abc");
    write(dir / "a" / "x.txt", "");
    std::string manifest = std::string("a/x.txt\t") + kEmptySha256 + "\n" +
                           "b.txt\t" + kAbcSha256 + "\n";
    CHECK(hash_tree(dir) == sha256_hex(manifest));
}

TEST_CASE("digest is independent of creation order") {
    fs::path d1 = fresh_dir("order1");
    write(d1 / "a", "1");
    write(d1 / "b", "2");
    fs::path d2 = fresh_dir("order2");
    write(d2 / "b", "2");
    write(d2 / "a", "1");
    CHECK(hash_tree(d1) == hash_tree(d2));
}

TEST_CASE("copying a tree preserves its digest") {
    fs::path src = fresh_dir("copysrc");
    write(src / "deep" / "f1", "hello");
    write(src / "f2", "world");
    fs::path dst = fresh_dir("copydst");
    fs::copy(src, dst, fs::copy_options::recursive |
                           fs::copy_options::overwrite_existing);
    CHECK(hash_tree(src) == hash_tree(dst));
}

TEST_CASE("metadata does not affect the digest") {
    fs::path dir = fresh_dir("meta");
    write(dir / "f", "abc");
    std::string before = hash_tree(dir);
    fs::permissions(dir / "f", fs::perms::owner_all);
    fs::last_write_time(dir / "f",
                        fs::last_write_time(dir / "f") - std::chrono::hours(24));
    CHECK(hash_tree(dir) == before);
}

TEST_CASE("empty subdirectories contribute nothing") {
    fs::path dir = fresh_dir("emptysub");
    write(dir / "f", "abc");
    std::string before = hash_tree(dir);
    fs::create_directories(dir / "hollow" / "deeper");
    CHECK(hash_tree(dir) == before);
}

TEST_CASE("missing path raises NotFoundError") {
    try {
        hash_tree(fs::temp_directory_path() / "expflow-no-such-path-xyz");
        FAIL("expected NotFoundError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::not_found);
    }
}

TEST_CASE("sha256_file matches sha256_hex") {
    fs::path dir = fresh_dir("filevshex");
    write(dir / "f", "some longer content\nwith lines\n");
    CHECK(sha256_file(dir / "f") == sha256_hex("some longer content\nwith lines\n"));
}

TEST_CASE("single byte change changes the digest") {
    fs::path dir = fresh_dir("flip");
    write(dir / "f", "abc");
    std::string before = hash_tree(dir);
    write(dir / "f", "abd");
    CHECK(hash_tree(dir) != before);
}
