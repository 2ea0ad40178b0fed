/* Busy loop: forever without arguments, else argv[1] iterations then "done". */
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
    volatile unsigned long i = 0;
    unsigned long n = argc > 1 ? strtoul(argv[1], NULL, 10) : 0;
    if (n == 0)
        for (;;)
            i++;
    for (i = 0; i < n; i++)
        ;
    puts("done");
    return 0;
}
