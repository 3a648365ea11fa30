/* SPDX-License-Identifier: Apache-2.0 */
#include <stdio.h>
#include <string.h>

#include "slu/slu.h"

int main(void) {
  slu_config* config = NULL;
  char* value = NULL;
  if (slu_config_new(&config) != SLU_OK) return 1;
  if (slu_config_set(config, "hidden", "16") != SLU_OK) return 1;
  if (slu_config_get(config, "hidden", &value) != SLU_OK || strcmp(value, "16") != 0) return 1;
  slu_string_free(value);
  if (slu_config_set(config, "bogus", "1") != SLU_E_CONFIG) return 1;
  printf("%s: %s\n", slu_status_name(SLU_E_CONFIG), slu_last_error());
  slu_config_free(config);
  return 0;
}
