#include <doctest/doctest.h>

#include <filesystem>

#include "bidev/errors.hpp"
#include "bidev/prompt.hpp"
#include "bidev/util.hpp"

namespace fs = std::filesystem;
using namespace bidev;

TEST_CASE("parse_template splits instruction, demonstrations, and query block") {
    const std::string text =
        "Answer briefly.\n"
        "---\n"
        "Question: 2+2?\n"
        "---\n"
        "4\n"
        "---\n"
        "Question: {{question}}\n";
    const PromptTemplate tmpl = parse_template(Role::Querier, text);
    CHECK(tmpl.instruction == "Answer briefly.");
    REQUIRE(tmpl.demonstrations.size() == 1);
    CHECK(tmpl.demonstrations[0].first == "Question: 2+2?");
    CHECK(tmpl.demonstrations[0].second == "4");
    CHECK(tmpl.query_block == "Question: {{question}}");
    CHECK(tmpl.slots == std::set<std::string>{"question"});
}

TEST_CASE("single-block file is a bare query block") {
    const PromptTemplate tmpl = parse_template(Role::Checker, "Verify: {{claim}}");
    CHECK(tmpl.instruction.empty());
    CHECK(tmpl.demonstrations.empty());
    CHECK(tmpl.query_block == "Verify: {{claim}}");
}

TEST_CASE("two blocks mean instruction plus query, no demonstrations") {
    const PromptTemplate tmpl = parse_template(Role::Checker, "Be terse.\n---\n{{claim}}");
    CHECK(tmpl.instruction == "Be terse.");
    CHECK(tmpl.demonstrations.empty());
    CHECK(tmpl.query_block == "{{claim}}");
}

TEST_CASE("odd demonstration block count is a format error") {
    const std::string text = "inst\n---\nin1\n---\nout1\n---\nin2\n---\n{{claim}}";
    CHECK_THROWS_AS(parse_template(Role::Checker, text), TemplateFormatError);
}

TEST_CASE("empty file is a format error") {
    CHECK_THROWS_AS(parse_template(Role::Checker, ""), TemplateFormatError);
    CHECK_THROWS_AS(parse_template(Role::Checker, "  \n \n"), TemplateFormatError);
}

TEST_CASE("render substitutes every slot and keeps demonstration order") {
    const PromptTemplate tmpl = PromptTemplate::make(
        Role::Rewriter, "Rewrite.", {{"in1", "out1"}, {"in2", "out2"}},
        "Claim: {{claim}}\nAnswer: {{answer}}");
    const std::string prompt = render(tmpl, {{"claim", "X was born in 1990"}, {"answer", "X"}});
    CHECK(prompt.find("Rewrite.") == 0);
    CHECK(prompt.find("in1") < prompt.find("out1"));
    CHECK(prompt.find("out1") < prompt.find("in2"));
    CHECK(prompt.find("X was born in 1990") != std::string::npos);
    CHECK(prompt.find("{{") == std::string::npos);
    // The query block comes last, so the bound claim text ends the prompt.
    CHECK(prompt.rfind("Answer: X") == prompt.size() - std::string("Answer: X").size());
}

TEST_CASE("render on a slotless template needs no bindings") {
    const PromptTemplate tmpl = PromptTemplate::make(Role::Checker, "", {}, "fixed question");
    CHECK(render(tmpl, {}) == "fixed question");
}

TEST_CASE("unbound slot raises MissingBinding with the slot name") {
    const PromptTemplate tmpl =
        PromptTemplate::make(Role::Rewriter, "", {}, "{{claim}} {{question}}");
    try {
        render(tmpl, {{"claim", "c"}});
        FAIL("expected MissingBindingError");
    } catch (const MissingBindingError& error) {
        CHECK(std::string(error.what()).find("question") != std::string::npos);
    }
}

TEST_CASE("binding without a matching slot raises UnknownBinding") {
    const PromptTemplate tmpl = PromptTemplate::make(Role::Rewriter, "", {}, "{{claim}}");
    CHECK_THROWS_AS(render(tmpl, {{"claim", "c"}, {"bogus", "x"}}), UnknownBindingError);
}

TEST_CASE("TemplateLibrary loads the shipped directory and finds every pipeline role") {
    const TemplateLibrary library = TemplateLibrary::load_dir(BIDEV_TEMPLATES_DIR);
    CHECK_NOTHROW(library.require_pipeline_templates());
    CHECK(library.get("perceptor").role == Role::Perceptor);
    CHECK(library.get("decomposer_naive").role == Role::Decomposer);
    CHECK(library.get("decomposer_bidev").role == Role::Decomposer);
    CHECK(library.get("filter").slots == std::set<std::string>{"paragraph", "query"});
}

TEST_CASE("require_pipeline_templates names the missing template") {
    TemplateLibrary library;
    library.put("perceptor", PromptTemplate::make(Role::Perceptor, "", {}, "{{claim}}"));
    try {
        library.require_pipeline_templates();
        FAIL("expected ConfigError");
    } catch (const ConfigError& error) {
        CHECK(std::string(error.what()).find("querier") != std::string::npos);
    }
}

TEST_CASE("unknown template name raises ConfigError") {
    TemplateLibrary library;
    CHECK_THROWS_AS(library.get("nope"), ConfigError);
}
