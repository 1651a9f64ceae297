#include <math.h>
#include <stdio.h>
#include "scatterlab.h"

static int check(SlStatus s, const char *what) {
  if (s != SL_STATUS_OK) {
    const char *msg = sl_last_error();
    fprintf(stderr, "%s failed (%d): %s\n", what, (int)s, msg ? msg : "?");
    return 1;
  }
  return 0;
}

int main(void) {
  SlTable *t = NULL;
  if (check(sl_table_from_preset("disk", &t), "preset")) return 1;

  SlVolumes vol;
  if (check(sl_domain_volumes(t, &vol), "volumes")) return 1;

  SlPhasePoint z[4];
  double mass = 0.0;
  if (check(sl_sample(t, 4, 7, z, 4, &mass), "sample")) return 1;

  SlChord c;
  if (check(sl_causality_map(t, &z[0], &c), "causality")) return 1;

  SlTable *bad = NULL;
  SlStatus s = sl_table_from_preset("nope", &bad);
  int bad_ok = s == SL_STATUS_CONFIG && bad == NULL && sl_last_error() != NULL;

  printf("%s %.12f %.12f %.12f %d\n", sl_version(), vol.vol_m, vol.vol_dm, mass, bad_ok);
  sl_table_free(t);
  sl_table_free(NULL);
  return 0;
}
