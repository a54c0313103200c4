#include <random>

#include <gtest/gtest.h>

#include "typedom/dataset.hpp"

using namespace typedom;

namespace {

DomainSet emergency_domains() {
  return DomainSet({
      {0.5, true, {{"##dom_p0.5_c0", "ambulance", {"air ambulance", "ambulance", "fire engine", "fire truck", "police car"}}}},
      {0.9, true,
       {{"##dom_p0.9_c0", "ambulance", {"air ambulance", "ambulance"}},
        {"##dom_p0.9_c1", "fire truck", {"fire engine", "fire truck", "police car"}}}},
  });
}

}  // namespace

TEST(LoadExamples, ParsesSchema) {
  const auto exs = parse_examples(
      R"({"id":"e1","sentence":"The company said it would","mention":[0,11],"labels":["organization","company"]})");
  ASSERT_EQ(exs.size(), 1u);
  EXPECT_EQ(exs[0].id, "e1");
  EXPECT_EQ(exs[0].mention, (Span{0, 11}));
  EXPECT_EQ(exs[0].labels, (std::vector<std::string>{"organization", "company"}));
}

TEST(LoadExamples, EmptyLabels) {
  const auto exs = parse_examples(R"({"id":"t","sentence":"It rained.","mention":[0,2],"labels":[]})");
  ASSERT_EQ(exs.size(), 1u);
  EXPECT_TRUE(exs[0].labels.empty());
}

TEST(LoadExamples, InvalidSpanIsValidationError) {
  try {
    parse_examples("{\"id\":\"a\",\"sentence\":\"ok\",\"mention\":[0,1],\"labels\":[]}\n"
                   "{\"id\":\"b\",\"sentence\":\"abcdefgh\",\"mention\":[5,3],\"labels\":[]}\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::input);
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(parse_examples(R"({"id":"c","sentence":"abc","mention":[0,4],"labels":[]})"), Error);
  EXPECT_THROW(parse_examples(R"({"id":"c","sentence":"abc","mention":[1,1],"labels":[]})"), Error);
}

TEST(LoadExamples, MalformedLineNamesLineNumber) {
  try {
    parse_examples("{\"id\":\"a\",\"sentence\":\"ok\",\"mention\":[0,1],\"labels\":[]}\n\n{oops\n");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::parse);
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}

TEST(LoadExamples, SpansCountCharactersNotBytes) {
  // "Zoë" is three characters and four bytes
  EXPECT_NO_THROW(parse_examples(R"({"id":"u","sentence":"Zoë","mention":[0,3],"labels":[]})"));
  EXPECT_THROW(parse_examples(R"({"id":"u","sentence":"Zoë","mention":[0,4],"labels":[]})"), Error);
}

TEST(SaveExamples, SaveLoadIsIdentityOnCanonicalFiles) {
  const std::string text =
      "{\"id\":\"e1\",\"sentence\":\"The company said…\",\"mention\":[0,11],\"labels\":[\"organization\",\"company\"]}\n"
      "{\"id\":\"e2\",\"sentence\":\"He left.\",\"mention\":[0,2],\"labels\":[]}\n";
  EXPECT_EQ(serialize_examples(parse_examples(text)), text);
}

TEST(AugmentExamples, AddsOneLabelPerContainingCluster) {
  const auto domains = emergency_domains();
  Example ex{"e", "The ambulance came.", {4, 13}, {"ambulance"}};
  const auto out = augment_example(ex, domains);
  EXPECT_EQ(out.labels, (std::vector<std::string>{"ambulance", "##dom_p0.5_c0", "##dom_p0.9_c0"}));
}

TEST(AugmentExamples, EmptyLabelsUnchanged) {
  Example ex{"e", "Something.", {0, 9}, {}};
  EXPECT_EQ(augment_example(ex, emergency_domains()), ex);
}

TEST(AugmentExamples, SharedClusterAddedOnce) {
  Example ex{"e", "Trucks.", {0, 6}, {"police car", "fire truck"}};
  const auto out = augment_example(ex, emergency_domains());
  EXPECT_EQ(out.labels, (std::vector<std::string>{"police car", "fire truck", "##dom_p0.5_c0", "##dom_p0.9_c1"}));
}

TEST(AugmentExamples, UnknownLabelsContributeNothing) {
  Example ex{"e", "A thing.", {0, 7}, {"object", "thing"}};
  EXPECT_EQ(augment_example(ex, emergency_domains()), ex);
}

TEST(AugmentExamples, PropertiesOnRandomExamples) {
  const auto domains = emergency_domains();
  const std::vector<std::string> pool{"air ambulance", "ambulance", "fire engine", "fire truck",
                                      "police car",    "person",    "vehicle",     "object"};
  std::mt19937 rng(17);
  std::vector<Example> exs;
  for (int i = 0; i < 300; ++i) {
    Example ex{"e" + std::to_string(i), "Sentence number " + std::to_string(i), {0, 8}, {}};
    std::vector<std::string> shuffled = pool;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    shuffled.resize(rng() % 5);
    ex.labels = shuffled;
    exs.push_back(ex);
  }
  const auto once = augment_examples(exs, domains);
  const auto twice = augment_examples(once, domains);
  EXPECT_EQ(once, twice);

  auto stripped = once;
  for (std::size_t i = 0; i < once.size(); ++i) {
    EXPECT_GE(once[i].labels.size(), exs[i].labels.size());
    std::erase_if(stripped[i].labels, [](const std::string& l) { return is_synthetic(l); });
  }
  EXPECT_EQ(serialize_examples(stripped), serialize_examples(exs));
}
