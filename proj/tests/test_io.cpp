#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "qubit_est/io.hpp"

using namespace qest;

TEST(StrategyJson, TreeRoundTrip) {
  Rng rng(1);
  AdaptiveTree t(3);
  for (std::size_t i = 0; i < t.node_count(); ++i) t.set_node(i, sample_prior(Prior::Sphere3D, rng));
  const json j = tree_json(t, Prior::Sphere3D);
  EXPECT_EQ(j["kind"], "adaptive_tree");
  EXPECT_EQ(j["nodes"].size(), 7u);
  EXPECT_EQ(j["nodes"][2]["prefix"], "1");
  const auto spec = parse_strategy(j.dump());
  const auto& back = std::get<TreeSpec>(spec);
  EXPECT_EQ(back.prior, Prior::Sphere3D);
  for (std::size_t i = 0; i < t.node_count(); ++i) EXPECT_EQ(back.tree.node(i), t.node(i));
}

TEST(StrategyJson, NodesInAnyOrder) {
  const auto spec = parse_strategy(R"({"kind":"adaptive_tree","depth":2,"nodes":[
      {"prefix":"1","dir":[0,1,0]},{"prefix":"","dir":[0,0,2]},{"prefix":"0","dir":[1,0,0]}]})");
  const auto& t = std::get<TreeSpec>(spec).tree;
  EXPECT_EQ(t.direction(History{}), kAxisZ);
  EXPECT_EQ(t.direction(History::parse("1")), kAxisY);
  EXPECT_FALSE(std::get<TreeSpec>(spec).prior.has_value());
}

TEST(StrategyJson, TreeErrors) {
  const char* missing = R"({"kind":"adaptive_tree","depth":2,"nodes":[{"prefix":"","dir":[0,0,1]},{"prefix":"0","dir":[1,0,0]}]})";
  EXPECT_THROW(parse_strategy(missing), StrategyFormatError);
  const char* dup =
      R"({"kind":"adaptive_tree","depth":1,"nodes":[{"prefix":"","dir":[0,0,1]},{"prefix":"","dir":[1,0,0]}]})";
  EXPECT_THROW(parse_strategy(dup), StrategyFormatError);
  const char* deep = R"({"kind":"adaptive_tree","depth":1,"nodes":[{"prefix":"","dir":[0,0,1]},{"prefix":"0","dir":[1,0,0]}]})";
  EXPECT_THROW(parse_strategy(deep), StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"adaptive_tree","depth":1,"nodes":[{"prefix":"","dir":[0,0,0]}]})"),
               StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"adaptive_tree","depth":1,"nodes":[{"prefix":"x","dir":[0,0,1]}]})"),
               StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"adaptive_tree","depth":1,"nodes":[{"prefix":"","dir":[0,1]}]})"),
               StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"adaptive_tree","depth":30,"nodes":[]})"), CapExceeded);
}

TEST(StrategyJson, MalformedAndUnknown) {
  EXPECT_THROW(parse_strategy("{\"kind\": \"adaptive_tree\", "), StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"spiral","depth":3})"), StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"depth":3})"), StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"fixed_axes","depth":"3"})"), StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"([1,2,3])"), StrategyFormatError);
}

TEST(StrategyJson, FixedAxesRoundTrip) {
  const FixedAxesSpec f{FixedAxesPlan({kAxisX, kAxisY, kAxisZ}, {2, 3, 2}), GuessRule::Tomographic, Prior::Sphere3D};
  const auto back = std::get<FixedAxesSpec>(parse_strategy(to_json(StrategySpec{f}).dump()));
  EXPECT_EQ(back.plan.repetitions(), f.plan.repetitions());
  EXPECT_EQ(back.guess, GuessRule::Tomographic);
  EXPECT_THROW(parse_strategy(R"({"kind":"fixed_axes","depth":4,"axes":[[1,0,0],[0,1,0]],"repetitions":[2,1]})"),
               StrategyFormatError);
  EXPECT_THROW(parse_strategy(R"({"kind":"fixed_axes","depth":2,"axes":[[1,0,0],[1,1,0]],"repetitions":[1,1]})"),
               InvalidPlan);
}

TEST(StrategyJson, TwoStageAndConstant) {
  const auto plan = std::get<TwoStagePlan>(parse_strategy(R"({"kind":"two_stage","depth":256,"beta":0.5,"lambda":1})"));
  EXPECT_EQ(plan.first_stage, 16);
  EXPECT_EQ(spec_copies(StrategySpec{plan}), 256);
  EXPECT_THROW(parse_strategy(R"({"kind":"two_stage","depth":256,"beta":0.5,"lambda":1,"first_stage":15})"),
               StrategyFormatError);
  const auto rt = std::get<TwoStagePlan>(parse_strategy(to_json(StrategySpec{plan}).dump()));
  EXPECT_EQ(rt.copies, 256);
  const auto c = std::get<ConstantSpec>(parse_strategy(R"({"kind":"constant_guess","depth":5,"guess_dir":[0,0,1]})"));
  EXPECT_EQ(c.copies, 5);
  EXPECT_EQ(c.guess, kAxisZ);
}

TEST(Reports, JsonAndCsv) {
  AdaptiveTree t(2);
  t.set_direction(History::parse("0"), kAxisX);
  t.set_direction(History::parse("1"), kAxisX);
  const auto r = eval_adaptive_tree(t, Prior::Sphere3D);
  const json j = to_json(r);
  EXPECT_NEAR(j["fidelity"].get<double>(), (3 + std::sqrt(2.0)) / 6, 1e-14);
  EXPECT_EQ(j["outcomes"].size(), 4u);
  EXPECT_EQ(j["outcomes"][1]["id"], "10");  // depth-first, first outcome fixed first
  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  int rows = 0;
  std::getline(is, line);
  EXPECT_EQ(line, "outcome,probability,v_magnitude,guess_x,guess_y,guess_z");
  while (std::getline(is, line)) ++rows;
  EXPECT_EQ(rows, 4);
}
