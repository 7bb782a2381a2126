#include <doctest/doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "bidev/util.hpp"

namespace fs = std::filesystem;
using namespace bidev;

namespace {

fs::path temp_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("bidev_util_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("fnv1a64 matches the published reference vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("foobar") == 0x85944171f73967e8ULL);
}

TEST_CASE("to_hex is 16 lowercase digits, zero padded") {
    CHECK(to_hex(0) == "0000000000000000");
    CHECK(to_hex(0xdeadbeefULL) == "00000000deadbeef");
    CHECK(to_hex(0xcbf29ce484222325ULL) == "cbf29ce484222325");
}

TEST_CASE("trim and rtrim") {
    CHECK(rtrim("abc  \t\r\n") == "abc");
    CHECK(rtrim("abc") == "abc");
    CHECK(rtrim("") == "");
    CHECK(trim("  abc ") == "abc");
    CHECK(trim(" \t ") == "");
}

TEST_CASE("split_lines handles LF, CRLF, and missing trailing newline") {
    const auto lines = split_lines("a\r\nb\nc");
    REQUIRE(lines.size() == 3);
    CHECK(lines[0] == "a");
    CHECK(lines[1] == "b");
    CHECK(lines[2] == "c");
    CHECK(split_lines("").empty());
    CHECK(split_lines("x\n").size() == 1);
}

TEST_CASE("for_each_jsonl_line reports 1-based numbers and skips blanks") {
    const fs::path dir = temp_dir("jsonl");
    {
        std::ofstream out(dir / "data.jsonl");
        out << "{\"i\":1}\n\n{\"i\":3}\n";
    }
    std::map<int, std::string> seen;
    for_each_jsonl_line(dir / "data.jsonl",
                        [&](int line, const std::string& text) { seen[line] = text; });
    REQUIRE(seen.size() == 2);
    CHECK(seen.at(1) == "{\"i\":1}");
    CHECK(seen.at(3) == "{\"i\":3}");
}

TEST_CASE("write_file_atomic round-trips content and leaves no temp files") {
    const fs::path dir = temp_dir("atomic");
    const fs::path target = dir / "out.txt";
    write_file_atomic(target, "hello\n");
    CHECK(read_file(target) == "hello\n");
    write_file_atomic(target, "replaced");
    CHECK(read_file(target) == "replaced");
    std::size_t entries = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        (void)entry;
        ++entries;
    }
    CHECK(entries == 1);
}

TEST_CASE("file_digest changes with content") {
    const fs::path dir = temp_dir("digest");
    write_file_atomic(dir / "a.txt", "alpha");
    write_file_atomic(dir / "b.txt", "beta");
    CHECK(file_digest(dir / "a.txt") != file_digest(dir / "b.txt"));
    CHECK(file_digest(dir / "a.txt") == to_hex(fnv1a64("alpha")));
}

TEST_CASE("iso8601_now has the expected shape") {
    const std::string now = iso8601_now();
    REQUIRE(now.size() == 20);
    CHECK(now[4] == '-');
    CHECK(now[10] == 'T');
    CHECK(now.back() == 'Z');
}
