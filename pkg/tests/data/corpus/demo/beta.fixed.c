#include <stdio.h>

int sum(int *xs, int n) {
    int acc = 0;
    for (int i = 0; i < n; i++) {
        acc += xs[i];
    }
    return acc;
}

int main(void) {
    int xs[3] = {1, 2, 3};
    printf("%d\n", sum(xs, 3));
    return 0;
}
