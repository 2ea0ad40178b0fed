/* Fannkuch-redux: max pancake flips and checksum over all permutations. */
#include <stdio.h>
#include <stdlib.h>

static int fannkuch(int n, int *checksum_out) {
    int *perm = malloc(n * sizeof(int));
    int *perm1 = malloc(n * sizeof(int));
    int *count = malloc(n * sizeof(int));
    int max_flips = 0, perm_count = 0, checksum = 0;
    int r = n;

    for (int i = 0; i < n; i++)
        perm1[i] = i;
    for (;;) {
        while (r != 1) {
            count[r - 1] = r;
            r--;
        }
        for (int i = 0; i < n; i++)
            perm[i] = perm1[i];
        int flips = 0, k;
        while ((k = perm[0]) != 0) {
            int k2 = (k + 1) >> 1;
            for (int i = 0; i < k2; i++) {
                int t = perm[i];
                perm[i] = perm[k - i];
                perm[k - i] = t;
            }
            flips++;
        }
        if (flips > max_flips)
            max_flips = flips;
        checksum += (perm_count % 2 == 0) ? flips : -flips;

        for (;;) {
            if (r == n) {
                free(perm);
                free(perm1);
                free(count);
                *checksum_out = checksum;
                return max_flips;
            }
            int perm0 = perm1[0];
            for (int i = 0; i < r; i++)
                perm1[i] = perm1[i + 1];
            perm1[r] = perm0;
            count[r]--;
            if (count[r] > 0)
                break;
            r++;
        }
        perm_count++;
    }
}

int main(int argc, char **argv) {
    int n, checksum;
    if (argc < 2 || (n = atoi(argv[1])) < 1) {
        fprintf(stderr, "usage: fannkuch-redux <n>\n");
        return 2;
    }
    int max_flips = fannkuch(n, &checksum);
    printf("%d\nPfannkuchen(%d) = %d\n", checksum, n, max_flips);
    return 0;
}
