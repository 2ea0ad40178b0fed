/* Allocates and touches 1 MiB blocks until allocation fails. */
#include <stdio.h>
#include <stdlib.h>

static char *volatile keep;

int main(void) {
    long blocks = 0;
    for (;;) {
        char *p = malloc(1 << 20);
        if (!p) {
            printf("allocated %ld MiB\n", blocks);
            return 3;
        }
        for (int i = 0; i < (1 << 20); i += 4096)
            ((volatile char *)p)[i] = 1;
        keep = p;
        blocks++;
    }
}
