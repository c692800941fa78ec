#include <math.h>
#include <stdio.h>
#include <string.h>

#include "isskit.h"

#define CHECK(cond)                                                   \
    do {                                                              \
        if (!(cond)) {                                                \
            fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond, \
                    isskit_last_error());                             \
            return 1;                                                 \
        }                                                             \
    } while (0)

int main(void) {
    IsskitKFun *k = NULL;
    CHECK(isskit_kfun_power(0.9, 1.0, &k) == ISSKIT_STATUS_OK);
    double v = 0.0;
    CHECK(isskit_kfun_eval(k, 2.0, &v) == ISSKIT_STATUS_OK);
    CHECK(fabs(v - 1.8) < 1e-12);

    IsskitGainMatrix *g = NULL;
    CHECK(isskit_gains_new(2, &g) == ISSKIT_STATUS_OK);
    CHECK(isskit_gains_set(g, 0, 1, k) == ISSKIT_STATUS_OK);
    CHECK(isskit_gains_set(g, 1, 0, k) == ISSKIT_STATUS_OK);
    bool holds = false;
    char *cert = NULL;
    CHECK(isskit_small_gain_check(g, &holds, &cert) == ISSKIT_STATUS_OK);
    CHECK(holds);
    CHECK(strstr(cert, "small_gain") != NULL);
    isskit_string_free(cert);

    double r[4] = {-1.0, 0.5, 0.0, -2.0};
    double p[4];
    double res = 1.0;
    CHECK(isskit_solve_lyapunov(r, 2, p, &res) == ISSKIT_STATUS_OK);
    CHECK(res < 1e-10);

    CHECK(isskit_kfun_eval(NULL, 1.0, &v) == ISSKIT_STATUS_NULL_POINTER);
    CHECK(strlen(isskit_last_error()) > 0);

    isskit_gains_free(g);
    isskit_kfun_free(k);
    printf("isskit %s ok\n", isskit_version());
    return 0;
}
