#pragma once

// Hand-built CoNLL-U fixtures with the role extractions they must produce.
// Shared by the unit suite and the acceptance suite.

#include <optional>
#include <string>
#include <vector>

namespace fixtures {

struct Extraction {
  std::string sentence;
  std::optional<std::string> verb, subj, dobj, pobj;
};

inline const char* conllu_fixture_text() {
  return
      // two dogs pull on opposite ends of a rope .
      "# sent_id = fx1\n"
      "1\ttwo\t_\tNUM\t_\t_\t2\tnummod\t_\t_\n"
      "2\tdogs\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "3\tpull\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "4\ton\t_\tADP\t_\t_\t3\tprt\t_\t_\n"
      "5\topposite\t_\tADJ\t_\t_\t6\tamod\t_\t_\n"
      "6\tends\t_\tNOUN\t_\t_\t3\tdobj\t_\t_\n"
      "7\tof\t_\tADP\t_\t_\t6\tprep\t_\t_\n"
      "8\ta\t_\tDET\t_\t_\t9\tdet\t_\t_\n"
      "9\trope\t_\tNOUN\t_\t_\t7\tpobj\t_\t_\n"
      "10\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
      "\n"
      // a lady lays at a beach .
      "# sent_id = fx2\n"
      "1\ta\t_\tDET\t_\t_\t2\tdet\t_\t_\n"
      "2\tlady\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "3\tlays\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "4\tat\t_\tADP\t_\t_\t3\tprep\t_\t_\n"
      "5\ta\t_\tDET\t_\t_\t6\tdet\t_\t_\n"
      "6\tbeach\t_\tNOUN\t_\t_\t4\tpobj\t_\t_\n"
      "7\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
      "\n"
      // terrible .
      "# sent_id = fx3\n"
      "1\tterrible\t_\tADJ\t_\t_\t0\troot\t_\t_\n"
      "2\t.\t_\tPUNCT\t_\t_\t1\tpunct\t_\t_\n"
      "\n"
      // people are outside playing baseball .
      "# sent_id = fx4\n"
      "1\tpeople\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "2\tare\t_\tAUX\t_\t_\t3\tcop\t_\t_\n"
      "3\toutside\t_\tADV\t_\t_\t0\troot\t_\t_\n"
      "4\tplaying\t_\tVERB\t_\t_\t3\tadvcl\t_\t_\n"
      "5\tbaseball\t_\tNOUN\t_\t_\t4\tdobj\t_\t_\n"
      "6\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
      "\n"
      // i was originally told it would take _ num _ mins .
      "# sent_id = fx5\n"
      "1\ti\t_\tPRON\t_\t_\t4\tnsubjpass\t_\t_\n"
      "2\twas\t_\tAUX\t_\t_\t4\tauxpass\t_\t_\n"
      "3\toriginally\t_\tADV\t_\t_\t4\tadvmod\t_\t_\n"
      "4\ttold\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "5\tit\t_\tPRON\t_\t_\t7\tnsubj\t_\t_\n"
      "6\twould\t_\tAUX\t_\t_\t7\taux\t_\t_\n"
      "7\ttake\t_\tVERB\t_\t_\t4\tccomp\t_\t_\n"
      "8\t_\t_\tSYM\t_\t_\t11\tdep\t_\t_\n"
      "9\tnum\t_\tNOUN\t_\t_\t11\tnummod\t_\t_\n"
      "10\t_\t_\tSYM\t_\t_\t11\tdep\t_\t_\n"
      "11\tmins\t_\tNOUN\t_\t_\t7\tdobj\t_\t_\n"
      "12\t.\t_\tPUNCT\t_\t_\t4\tpunct\t_\t_\n"
      "\n"
      // slow , over priced , i 'll go elsewhere next time .
      "# sent_id = fx6\n"
      "1\tslow\t_\tADJ\t_\t_\t8\tdep\t_\t_\n"
      "2\t,\t_\tPUNCT\t_\t_\t8\tpunct\t_\t_\n"
      "3\tover\t_\tADV\t_\t_\t4\tadvmod\t_\t_\n"
      "4\tpriced\t_\tVERB\t_\t_\t8\tdep\t_\t_\n"
      "5\t,\t_\tPUNCT\t_\t_\t8\tpunct\t_\t_\n"
      "6\ti\t_\tPRON\t_\t_\t8\tnsubj\t_\t_\n"
      "7\t'll\t_\tAUX\t_\t_\t8\taux\t_\t_\n"
      "8\tgo\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "9\telsewhere\t_\tADV\t_\t_\t8\tadvmod\t_\t_\n"
      "10\tnext\t_\tADJ\t_\t_\t11\tamod\t_\t_\n"
      "11\ttime\t_\tNOUN\t_\t_\t8\tnpadvmod\t_\t_\n"
      "12\t.\t_\tPUNCT\t_\t_\t8\tpunct\t_\t_\n"
      "\n"
      // we will not be back
      "# sent_id = fx7\n"
      "1\twe\t_\tPRON\t_\t_\t5\tnsubj\t_\t_\n"
      "2\twill\t_\tAUX\t_\t_\t5\taux\t_\t_\n"
      "3\tnot\t_\tPART\t_\t_\t5\tneg\t_\t_\n"
      "4\tbe\t_\tAUX\t_\t_\t5\tcop\t_\t_\n"
      "5\tback\t_\tADV\t_\t_\t0\troot\t_\t_\n"
      "\n"
      // at this point they were open and would be for another hour .
      "# sent_id = fx8\n"
      "1\tat\t_\tADP\t_\t_\t6\tprep\t_\t_\n"
      "2\tthis\t_\tDET\t_\t_\t3\tdet\t_\t_\n"
      "3\tpoint\t_\tNOUN\t_\t_\t1\tpobj\t_\t_\n"
      "4\tthey\t_\tPRON\t_\t_\t6\tnsubj\t_\t_\n"
      "5\twere\t_\tAUX\t_\t_\t6\tcop\t_\t_\n"
      "6\topen\t_\tADJ\t_\t_\t0\troot\t_\t_\n"
      "7\tand\t_\tCCONJ\t_\t_\t6\tcc\t_\t_\n"
      "8\twould\t_\tAUX\t_\t_\t9\taux\t_\t_\n"
      "9\tbe\t_\tVERB\t_\t_\t6\tconj\t_\t_\n"
      "10\tfor\t_\tADP\t_\t_\t9\tprep\t_\t_\n"
      "11\tanother\t_\tDET\t_\t_\t12\tdet\t_\t_\n"
      "12\thour\t_\tNOUN\t_\t_\t10\tpobj\t_\t_\n"
      "13\t.\t_\tPUNCT\t_\t_\t6\tpunct\t_\t_\n"
      "\n"
      // people are running through the streets while people watch .
      "# sent_id = fx9\n"
      "1\tpeople\t_\tNOUN\t_\t_\t3\tnsubj\t_\t_\n"
      "2\tare\t_\tAUX\t_\t_\t3\taux\t_\t_\n"
      "3\trunning\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "4\tthrough\t_\tADP\t_\t_\t3\tprep\t_\t_\n"
      "5\tthe\t_\tDET\t_\t_\t6\tdet\t_\t_\n"
      "6\tstreets\t_\tNOUN\t_\t_\t4\tpobj\t_\t_\n"
      "7\twhile\t_\tSCONJ\t_\t_\t9\tmark\t_\t_\n"
      "8\tpeople\t_\tNOUN\t_\t_\t9\tnsubj\t_\t_\n"
      "9\twatch\t_\tVERB\t_\t_\t3\tadvcl\t_\t_\n"
      "10\t.\t_\tPUNCT\t_\t_\t3\tpunct\t_\t_\n"
      "\n"
      // someone prepares food into bowls
      "# sent_id = fx10\n"
      "1\tsomeone\t_\tPRON\t_\t_\t2\tnsubj\t_\t_\n"
      "2\tprepares\t_\tVERB\t_\t_\t0\troot\t_\t_\n"
      "3\tfood\t_\tNOUN\t_\t_\t2\tdobj\t_\t_\n"
      "4\tinto\t_\tADP\t_\t_\t2\tprep\t_\t_\n"
      "5\tbowls\t_\tNOUN\t_\t_\t4\tpobj\t_\t_\n"
      "\n";
}

inline std::vector<Extraction> expected_extractions() {
  return {
      {"two dogs pull on opposite ends of a rope .", "pull", "two dogs",
       "opposite ends of a rope", "a rope"},
      {"a lady lays at a beach .", "lays", "a lady", std::nullopt, "a beach"},
      {"terrible .", std::nullopt, std::nullopt, std::nullopt, std::nullopt},
      {"people are outside playing baseball .", std::nullopt, "people", "baseball", std::nullopt},
      {"i was originally told it would take _ num _ mins .", "told", "it", "_ num _ mins",
       std::nullopt},
      {"slow , over priced , i 'll go elsewhere next time .", "go", "i", std::nullopt,
       std::nullopt},
      {"we will not be back", std::nullopt, "we", std::nullopt, std::nullopt},
      {"at this point they were open and would be for another hour .", std::nullopt, "they",
       std::nullopt, "this point"},
      {"people are running through the streets while people watch .", "running", "people",
       std::nullopt, "the streets"},
      {"someone prepares food into bowls", "prepares", "someone", "food", "bowls"},
  };
}

}  // namespace fixtures
