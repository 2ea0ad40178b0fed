/* Binary-trees: allocate, walk and free many perfect binary trees. */
#include <stdio.h>
#include <stdlib.h>

struct node {
    struct node *left, *right;
};

static struct node *create(int depth) {
    struct node *n = malloc(sizeof *n);
    if (!n) {
        fprintf(stderr, "out of memory\n");
        exit(3);
    }
    if (depth > 0) {
        n->left = create(depth - 1);
        n->right = create(depth - 1);
    } else {
        n->left = n->right = NULL;
    }
    return n;
}

static long check(const struct node *n) {
    return 1 + (n->left ? check(n->left) + check(n->right) : 0);
}

static void destroy(struct node *n) {
    if (n->left) {
        destroy(n->left);
        destroy(n->right);
    }
    free(n);
}

int main(int argc, char **argv) {
    int n;
    if (argc < 2 || (n = atoi(argv[1])) < 1) {
        fprintf(stderr, "usage: binary-trees <n>\n");
        return 2;
    }
    const int min_depth = 4;
    const int max_depth = n > min_depth + 2 ? n : min_depth + 2;
    const int stretch_depth = max_depth + 1;

    struct node *stretch = create(stretch_depth);
    printf("stretch tree of depth %d\t check: %ld\n", stretch_depth, check(stretch));
    destroy(stretch);

    struct node *long_lived = create(max_depth);
    for (int d = min_depth; d <= max_depth; d += 2) {
        long iterations = 1L << (max_depth - d + min_depth);
        long sum = 0;
        for (long i = 0; i < iterations; i++) {
            struct node *t = create(d);
            sum += check(t);
            destroy(t);
        }
        printf("%ld\t trees of depth %d\t check: %ld\n", iterations, d, sum);
    }
    printf("long lived tree of depth %d\t check: %ld\n", max_depth, check(long_lived));
    destroy(long_lived);
    return 0;
}
