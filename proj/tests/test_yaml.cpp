#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "expflow/node.hpp"
#include "expflow/yaml_parser.hpp"

#include <random>

using namespace expflow;

TEST_CASE("top-level scalar object") {
    SpecDocument doc = parse_spec("name: exp1\n", "t");
    REQUIRE(doc.objects.size() == 1);
    CHECK(doc.objects[0].first == "name");
    CHECK((*doc.find("name"))->scalar_value == "exp1");
    CHECK((*doc.find("name"))->scalar_type == ScalarType::string);
}

TEST_CASE("flow mapping with type tag") {
    SpecDocument doc = parse_spec("train: !Stage {script: [\"run.sh\"]}\n", "t");
    const NodePtr& train = *doc.find("train");
    CHECK(train->type_tag == "Stage");
    REQUIRE(train->is_mapping());
    const NodePtr& script = *train->find("script");
    REQUIRE(script->is_sequence());
    REQUIRE(script->items.size() == 1);
    CHECK(script->items[0]->scalar_value == "run.sh");
}

TEST_CASE("block mapping and sequence") {
    SpecDocument doc = parse_spec(
        "train: !Stage\n"
        "  script:\n"
        "    - prep.sh\n"
        "    - run.sh\n"
        "  params:\n"
        "    lr: 0.01\n"
        "    epochs: 5\n",
        "t");
    const NodePtr& train = *doc.find("train");
    CHECK((*train->find("script"))->items.size() == 2);
    const NodePtr& params = *train->find("params");
    CHECK((*params->find("lr"))->scalar_type == ScalarType::number);
    CHECK((*params->find("lr"))->scalar_value == "0.01");
}

TEST_CASE("declaration order preserved") {
    SpecDocument doc = parse_spec("b: 1\na: 2\nc: 3\n", "t");
    REQUIRE(doc.objects.size() == 3);
    CHECK(doc.objects[0].first == "b");
    CHECK(doc.objects[1].first == "a");
    CHECK(doc.objects[2].first == "c");
}

TEST_CASE("tab in indentation is a parse error") {
    CHECK_THROWS_AS(parse_spec("a:\n\tb: 1\n", "t"), Error);
    try {
        parse_spec("a:\n  b: 1\n\tc: 2\n", "t");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        REQUIRE(e.span().has_value());
        CHECK(e.span()->line == 3);
    }
}

TEST_CASE("duplicate top-level name") {
    try {
        parse_spec("a: 1\na: 2\n", "t");
        FAIL("expected DuplicateNameError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::duplicate_name);
    }
}

TEST_CASE("invalid top-level names rejected") {
    CHECK_THROWS_AS(parse_spec("9lives: 1\n", "t"), Error);
    CHECK_THROWS_AS(parse_spec("a b: 1\n", "t"), Error);
    CHECK_NOTHROW(parse_spec("_ok-name9: 1\n", "t"));
}

TEST_CASE("anchors, aliases and multi-document streams rejected") {
    CHECK_THROWS_AS(parse_spec("a: &anchor 1\n", "t"), Error);
    CHECK_THROWS_AS(parse_spec("a: *ref\n", "t"), Error);
    CHECK_THROWS_AS(parse_spec("---\na: 1\n", "t"), Error);
}

TEST_CASE("type tag only legal on mappings") {
    CHECK_THROWS_AS(parse_spec("a: !Stage hello\n", "t"), Error);
    CHECK_THROWS_AS(parse_spec("a: !Stage [1, 2]\n", "t"), Error);
    CHECK_NOTHROW(parse_spec("a: !Stage {x: 1}\n", "t"));
}

TEST_CASE("scalar classification") {
    SpecDocument doc = parse_spec(
        "a: true\nb: 3.25\nc: null\nd: hello\ne: ~\nf: \"42\"\ng: -7\n", "t");
    CHECK((*doc.find("a"))->scalar_type == ScalarType::boolean);
    CHECK((*doc.find("b"))->scalar_type == ScalarType::number);
    CHECK((*doc.find("c"))->scalar_type == ScalarType::null);
    CHECK((*doc.find("d"))->scalar_type == ScalarType::string);
    CHECK((*doc.find("e"))->scalar_type == ScalarType::null);
    CHECK((*doc.find("f"))->scalar_type == ScalarType::string);
    CHECK((*doc.find("f"))->scalar_value == "42");
    CHECK((*doc.find("g"))->scalar_type == ScalarType::number);
}

TEST_CASE("numbers keep their lexical form") {
    SpecDocument doc = parse_spec("a: 0.1000\nb: 1e3\n", "t");
    CHECK((*doc.find("a"))->scalar_value == "0.1000");
    CHECK((*doc.find("b"))->scalar_value == "1e3");
}

TEST_CASE("comments stripped outside quotes") {
    SpecDocument doc = parse_spec("a: hello # trailing\nb: \"x # not a comment\"\n", "t");
    CHECK((*doc.find("a"))->scalar_value == "hello");
    CHECK((*doc.find("b"))->scalar_value == "x # not a comment");
}

TEST_CASE("quoted scalar escapes") {
    SpecDocument doc = parse_spec("a: \"line\\nnext\"\nb: 'it''s'\n", "t");
    CHECK((*doc.find("a"))->scalar_value == "line\nnext");
    CHECK((*doc.find("b"))->scalar_value == "it's");
}

TEST_CASE("CRLF input accepted") {
    SpecDocument doc = parse_spec("a: 1\r\nb: 2\r\n", "t");
    CHECK(doc.objects.size() == 2);
}

TEST_CASE("format_version consumed with default") {
    SpecDocument plain = parse_spec("a: 1\n", "t");
    CHECK(plain.format_version == "1");
    SpecDocument versioned = parse_spec("format_version: \"2\"\na: 1\n", "t");
    CHECK(versioned.format_version == "2");
    CHECK(versioned.objects.size() == 1);
}

TEST_CASE("compact mapping after sequence dash") {
    SpecDocument doc = parse_spec(
        "vars:\n"
        "  - name: alpha\n"
        "    prompt: first\n"
        "  - name: beta\n",
        "t");
    const NodePtr& vars = *doc.find("vars");
    REQUIRE(vars->items.size() == 2);
    CHECK((*vars->items[0]->find("name"))->scalar_value == "alpha");
    CHECK((*vars->items[0]->find("prompt"))->scalar_value == "first");
    CHECK((*vars->items[1]->find("name"))->scalar_value == "beta");
}

TEST_CASE("duplicate keys within a mapping rejected") {
    CHECK_THROWS_AS(parse_spec("a:\n  x: 1\n  x: 2\n", "t"), Error);
    CHECK_THROWS_AS(parse_spec("a: {x: 1, x: 2}\n", "t"), Error);
}

TEST_CASE("parse errors carry line and column") {
    try {
        parse_spec("a: [1, 2\n", "t");
        FAIL("expected ParseError");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::parse_error);
        REQUIRE(e.span().has_value());
        CHECK(e.span()->line == 1);
    }
}

// ---- round trip: parse(serialize(doc)) structurally equals doc --------------

namespace {

NodePtr random_node(std::mt19937& rng, int depth) {
    std::uniform_int_distribution<int> kind_pick(0, depth >= 3 ? 0 : 2);
    switch (kind_pick(rng)) {
        case 1: {
            NodePtr seq = ObjectNode::make_sequence();
            std::uniform_int_distribution<int> n(0, 3);
            for (int i = n(rng); i > 0; --i)
                seq->items.push_back(random_node(rng, depth + 1));
            return seq;
        }
        case 2: {
            NodePtr map = ObjectNode::make_mapping();
            if (std::uniform_int_distribution<int>(0, 2)(rng) == 0)
                map->type_tag = "Stage";
            std::uniform_int_distribution<int> n(0, 3);
            int count = n(rng);
            for (int i = 0; i < count; ++i)
                map->set("k" + std::to_string(i), random_node(rng, depth + 1));
            return map;
        }
        default: {
            static const char* scalars[] = {"hello", "0.25", "true",  "null",
                                            "a b c", "#x",   "$cash", ""};
            std::uniform_int_distribution<int> pick(0, 7);
            std::string text = scalars[pick(rng)];
            ScalarType t = classify_plain_scalar(text);
            return ObjectNode::make_scalar(t, t == ScalarType::null ? "" : text);
        }
    }
}

} // namespace

TEST_CASE("property: serialize then parse round-trips structure") {
    std::mt19937 rng(20260824);
    for (int iter = 0; iter < 200; ++iter) {
        SpecDocument doc;
        std::uniform_int_distribution<int> n(1, 4);
        int count = n(rng);
        for (int i = 0; i < count; ++i) {
            NodePtr node = random_node(rng, 0);
            if (node->is_scalar() && !node->type_tag.empty()) node->type_tag.clear();
            doc.objects.emplace_back("obj" + std::to_string(i), node);
        }
        std::string text = serialize(doc);
        SpecDocument reparsed = parse_spec(text, "roundtrip");
        REQUIRE(reparsed.objects.size() == doc.objects.size());
        for (size_t i = 0; i < doc.objects.size(); ++i) {
            CHECK(reparsed.objects[i].first == doc.objects[i].first);
            bool equal = structurally_equal(*reparsed.objects[i].second,
                                            *doc.objects[i].second);
            if (!equal) {
                CAPTURE(text);
                CHECK(equal);
            }
        }
    }
}
