#include <stdio.h>
#include "levylab.h"

int main(void) {
    LlTriplet *t = NULL;
    LlEstimate e;
    double xi[1] = {1.0};
    if (ll_triplet_brownian(32, &t) != LL_STATUS_OK) return 1;
    if (ll_second_moment(t, xi, 1, 1.0, 10000, 7, &e) != LL_STATUS_OK) return 2;
    ll_triplet_free(t);
    printf("levylab %s: E<e1,X_1>^2 = %.4f +- %.4f (n=%llu)\n", ll_version(), e.mean, e.stderr,
           (unsigned long long)e.n);
    if (ll_space_new(4, "bogus", NULL) == LL_STATUS_OK) return 3;
    printf("error path: %s\n", ll_last_error());
    return 0;
}
