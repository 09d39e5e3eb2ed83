#include <math.h>
#include <stdio.h>
#include "qhahn.h"

int main(void) {
    QhahnModel *m = NULL;
    if (qhahn_model_new(0.2, 0.4, 0.3, 0.4, &m) != QhahnStatus_Ok) return 1;
    QhahnCoefficients c;
    if (qhahn_model_coefficients(m, &c) != QhahnStatus_Ok) return 2;
    if (fabs(c.kappa - 17.176184181360647) > 1e-9 || !c.munu_ok || !c.theta_ok) return 3;
    int64_t x;
    double xi;
    if (qhahn_simulate(m, 50, 0.0, 7, 0, &x, &xi) != QhahnStatus_Ok) return 4;
    double lhs, det;
    if (qhahn_q_laplace(m, 1, 5, -0.7, &lhs, &det) != QhahnStatus_Ok || fabs(lhs - det) > 1e-8) return 5;
    qhahn_model_free(m);
    QhahnModel *bad = NULL;
    if (qhahn_model_new(0.2, 0.3, 0.4, 0.4, &bad) != QhahnStatus_Domain || bad != NULL) return 6;
    printf("%s | %s\n", qhahn_status_str(QhahnStatus_Domain), qhahn_last_error());
    return 0;
}
