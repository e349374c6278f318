#include <stdio.h>
#include <string.h>
#include "adiafactor.h"

int main(void) {
    AfConfig *cfg = af_config_new(35);
    if (af_config_set_mode(cfg, AfMode_PaperCompat) != AfStatus_Ok) return 10;
    if (af_config_set_encoding(cfg, AfEncoding_PaperCompat) != AfStatus_Ok) return 11;
    AfReport *report = NULL;
    AfStatus st = af_factor(cfg, &report);
    if (st != AfStatus_Ok) return 12;
    uint64_t p = 0, q = 0;
    if (af_report_factors(report, &p, &q) != AfStatus_Ok) return 13;
    char *json = af_report_json(report);
    if (json == NULL || strstr(json, "\"stage\": \"report\"") == NULL) return 14;
    af_string_free(json);
    af_report_free(report);
    af_config_free(cfg);

    AfConfig *bad = af_config_new(36);
    AfReport *none = NULL;
    st = af_factor(bad, &none);
    af_config_free(bad);
    if (st != AfStatus_InvalidInput || none != NULL || af_last_error_message() == NULL) return 15;

    printf("%llu %llu\n", (unsigned long long)p, (unsigned long long)q);
    return 0;
}
