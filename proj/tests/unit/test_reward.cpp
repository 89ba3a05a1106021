#include <gtest/gtest.h>

#include <atomic>
#include <memory>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "synco/chem.hpp"
#include "synco/reward/http_client.hpp"
#include "synco/reward/oracle.hpp"

using namespace synco;

namespace {

ReactantPair pair_of(const std::string &a, const std::string &b) {
  return {{make_mol(parse_smiles(a)), make_mol(parse_smiles(b))}};
}

class ScriptedClient : public ForwardClient {
 public:
  explicit ScriptedClient(std::vector<std::string> products) : products_(std::move(products)) {}
  std::vector<std::string> predict(const std::vector<std::string> &reactants, int top_k) override {
    last_reactants = reactants;
    last_top_k = top_k;
    ++calls;
    return products_;
  }
  std::vector<std::string> last_reactants;
  int last_top_k = 0;
  int calls = 0;

 private:
  std::vector<std::string> products_;
};

// Mock reward service: answers /predict with `products` (or `raw_body` when
// set) and /health with 200.
class MockService {
 public:
  MockService() {
    server_.Get("/health", [](const httplib::Request &, httplib::Response &res) { res.status = 200; });
    server_.Post("/predict", [this](const httplib::Request &req, httplib::Response &res) {
      const auto body = nlohmann::json::parse(req.body);
      last_top_k = body.at("top_k").get<int>();
      last_reactants = body.at("reactants").get<std::vector<std::string>>();
      if (!raw_body.empty()) {
        res.set_content(raw_body, "application/json");
        return;
      }
      res.set_content(nlohmann::json{{"products", products}}.dump(), "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockService() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

  std::vector<std::string> products;
  std::string raw_body;
  std::atomic<int> last_top_k{0};
  std::vector<std::string> last_reactants;

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

std::vector<std::string> ranked_with_hit_at(int rank, const std::string &hit) {
  std::vector<std::string> v{"CC", "CCC", "CCCC", "CCCCC", "CCCCCC", "CCCCCCC", "CCCCCCCC"};
  v[rank - 1] = hit;
  return v;
}

}  // namespace

TEST(ExactMatch, CanonicalMultisetEquality) {
  EXPECT_EQ(exact_match(pair_of("OCC", "N"), pair_of("N", "CCO")), 1);
  EXPECT_EQ(exact_match(pair_of("CCO", "N"), pair_of("CCO", "O")), 0);
  EXPECT_EQ(exact_match(pair_of("C", "C"), pair_of("C", "CC")), 0);
}

TEST(RewardOracle, ExactOnlyMode) {
  Environment env;
  MolGraph a = parse_smiles("CC");
  a.mark(0);
  MolGraph b = parse_smiles("N");
  b.mark(0);
  State s = env.init_state(a, b, parse_smiles("CCN"));
  const auto truth = pair_of("CCCl", "N");
  const RewardOracle oracle = RewardOracle::exact_only();
  EXPECT_THROW(oracle(s, truth), InvalidOperation);
  s = env.apply_actions(s, Action::add(Element::Cl, BondOrder::Single, 0), Action::noop());
  s = env.apply_actions(s, Action::noop(), Action::noop());
  s = env.apply_actions(s, Action::noop(), Action::noop());
  EXPECT_EQ(oracle(s, truth), 1);
  EXPECT_EQ(oracle(s, pair_of("CCBr", "N")), 0);
  EXPECT_EQ(oracle(s, std::nullopt), 0);
}

TEST(RewardOracle, ForwardFallbackOnlyWhenExactMisses) {
  auto client = std::make_shared<ScriptedClient>(std::vector<std::string>{"NCC"});
  const RewardOracle oracle(client, 5);
  const auto product = make_mol(parse_smiles("CCN"));
  EXPECT_EQ(oracle.score(pair_of("CCCl", "N"), *product, pair_of("CCCl", "N")), 1);
  EXPECT_EQ(client->calls, 0);
  EXPECT_EQ(oracle.score(pair_of("CCBr", "N"), *product, pair_of("CCCl", "N")), 1);
  EXPECT_EQ(client->calls, 1);
  EXPECT_EQ(client->last_top_k, 5);
  EXPECT_THROW(RewardOracle(nullptr), InvalidOperation);
}

TEST(ForwardReward, RespectsTopKAndSkipsGarbage) {
  const auto product = make_mol(parse_smiles("c1ccccc1O"));
  ScriptedClient at5(ranked_with_hit_at(5, "Oc1ccccc1"));
  ScriptedClient at6(ranked_with_hit_at(6, "Oc1ccccc1"));
  EXPECT_EQ(forward_reward(pair_of("C", "O"), *product, at5, 5), 1);
  EXPECT_EQ(forward_reward(pair_of("C", "O"), *product, at6, 5), 0);
  EXPECT_EQ(forward_reward(pair_of("C", "O"), *product, at6, 6), 1);
  ScriptedClient garbage({"not a smiles(", "Oc1ccccc1"});
  EXPECT_EQ(forward_reward(pair_of("C", "O"), *product, garbage, 5), 1);
}

TEST(HttpForwardClient, RankFiveHitsRankSixMisses) {
  MockService svc;
  HttpForwardClient client(svc.url(), 5000);
  EXPECT_TRUE(client.healthy());
  const auto product = make_mol(parse_smiles("CC(=O)NC"));
  svc.products = ranked_with_hit_at(5, "CNC(C)=O");
  EXPECT_EQ(forward_reward(pair_of("CC(=O)Cl", "CN"), *product, client, 5), 1);
  EXPECT_EQ(svc.last_top_k.load(), 5);
  ASSERT_EQ(svc.last_reactants.size(), 2u);
  svc.products = ranked_with_hit_at(6, "CNC(C)=O");
  EXPECT_EQ(forward_reward(pair_of("CC(=O)Cl", "CN"), *product, client, 5), 0);
}

TEST(HttpForwardClient, MalformedResponseIsAnError) {
  MockService svc;
  HttpForwardClient client(svc.url(), 5000);
  svc.raw_body = "{\"items\": []}";
  EXPECT_THROW(client.predict({"C", "O"}, 5), OracleError);
  svc.raw_body = "not json";
  EXPECT_THROW(client.predict({"C", "O"}, 5), OracleError);
}

TEST(HttpForwardClient, ShutdownIsAnErrorNotZero) {
  auto svc = std::make_unique<MockService>();
  auto client = std::make_shared<HttpForwardClient>(svc->url(), 2000);
  svc->products = {"CC"};
  EXPECT_NO_THROW(client->predict({"C", "C"}, 5));
  svc->stop();
  svc.reset();
  const RewardOracle oracle(client, 5);
  const auto product = make_mol(parse_smiles("CC"));
  EXPECT_THROW(oracle.score(pair_of("C", "C"), *product, pair_of("C", "O")), OracleError);
  EXPECT_FALSE(client->healthy());
}
