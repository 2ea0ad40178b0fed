/* Mutates a global and linear memory, then prints both; a fresh instance prints "1 1". */
#include <stdio.h>

static int counter;
static unsigned char scratch[4096];

int main(void) {
    counter++;
    scratch[4095]++;
    printf("%d %d\n", counter, scratch[4095]);
    return 0;
}
