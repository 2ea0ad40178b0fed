/* Mandelbrot set rendered as a binary P4 portable bitmap on stdout. */
#include <stdio.h>
#include <stdlib.h>

int main(int argc, char **argv) {
    int n;
    if (argc < 2 || (n = atoi(argv[1])) < 1) {
        fprintf(stderr, "usage: mandelbrot <n>\n");
        return 2;
    }
    const int w = n, h = n, iter = 50;
    const double limit2 = 2.0 * 2.0;
    int bit_num = 0;
    unsigned char byte_acc = 0;

    printf("P4\n%d %d\n", w, h);
    for (int y = 0; y < h; y++) {
        for (int x = 0; x < w; x++) {
            double zr = 0.0, zi = 0.0, tr = 0.0, ti = 0.0;
            double cr = 2.0 * x / w - 1.5;
            double ci = 2.0 * y / h - 1.0;
            for (int i = 0; i < iter && tr + ti <= limit2; i++) {
                zi = 2.0 * zr * zi + ci;
                zr = tr - ti + cr;
                tr = zr * zr;
                ti = zi * zi;
            }
            byte_acc <<= 1;
            if (tr + ti <= limit2)
                byte_acc |= 0x01;
            bit_num++;
            if (bit_num == 8) {
                putchar(byte_acc);
                byte_acc = 0;
                bit_num = 0;
            } else if (x == w - 1) {
                byte_acc <<= (8 - w % 8);
                putchar(byte_acc);
                byte_acc = 0;
                bit_num = 0;
            }
        }
    }
    return 0;
}
