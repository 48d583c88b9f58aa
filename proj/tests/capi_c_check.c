/* Compiled as C: the public header must stay C-compatible. */
#include "wifidiag/wifidiag.h"

int wd_c_check(void) {
  wd_config* cfg = NULL;
  char hash[65];
  int predicted[3] = {1, 0, 1};
  int truth[3] = {1, 1, 0};
  double out[3];
  int ok = 1;
  if (wd_config_default(&cfg) != WD_OK) return 0;
  ok = ok && wd_config_hash(cfg, hash, sizeof hash) == WD_OK;
  ok = ok && wd_explanation_scores(predicted, truth, 3, out) == WD_OK;
  ok = ok && out[0] == 0.5 && out[1] == 0.5;
  wd_config_free(cfg);
  return ok;
}
