/* Loops forever issuing reads on stdin. */
#include <unistd.h>

int main(void) {
    char c;
    for (;;)
        (void)read(0, &c, 1);
}
